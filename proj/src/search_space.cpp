// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/search_space.hpp"

#include "sweepplan/error.hpp"
#include "sweepplan/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <tuple>

namespace sweepplan {

namespace {

const std::array<Fraction, 6> kFirstStage = {Fraction(1, 2),  Fraction(1, 4),  Fraction(1, 8),
                                             Fraction(1, 16), Fraction(1, 32), Fraction(0)};
const std::array<Fraction, 4> kSecondStage = {Fraction(1, 4), Fraction(1, 2), Fraction(3, 4),
                                              Fraction(1)};

auto order_key(const SetupSpec& s) {
    Fraction r1 = s.two_stage ? s.two_stage->r1 : Fraction(-1);
    Fraction r2 = s.two_stage ? s.two_stage->r2 : Fraction(-1);
    return std::make_tuple(s.factors.f_C, s.factors.f_D(), s.factors.f_r, s.factors.f_M,
                           s.factors.f_k, r1, r2);
}

int parse_int_field(std::string_view text, const std::string& id) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorCode::Parse, "malformed setup id '" + id + "'");
    }
    return value;
}

} // namespace

SearchRanges SearchRanges::defaults() {
    SearchRanges r;
    r.rows.push_back({{0}, {0, 4}, {-1, 5}, {0, 10}, {-5, 2}});
    r.rows.push_back({{-1, -2}, {0, 4}, {0, 5}, {0, 10}, {-6, 1}});
    r.rows.push_back({{-3, -4}, {0, 4}, {1, 6}, {0, 10}, {-7, 0}});
    return r;
}

SearchRanges SearchRanges::restricted_to(std::span<const int> compute_factors) const {
    SearchRanges out;
    for (const auto& row : rows) {
        SearchRow kept = row;
        kept.compute_factors.clear();
        for (int fc : row.compute_factors) {
            if (std::find(compute_factors.begin(), compute_factors.end(), fc) != compute_factors.end()) {
                kept.compute_factors.push_back(fc);
            }
        }
        if (!kept.compute_factors.empty()) {
            out.rows.push_back(std::move(kept));
        }
    }
    return out;
}

const SearchRow* SearchRanges::row_for(int f_C) const {
    for (const auto& row : rows) {
        if (std::find(row.compute_factors.begin(), row.compute_factors.end(), f_C) !=
            row.compute_factors.end()) {
            return &row;
        }
    }
    return nullptr;
}

const char* to_string(Approach a) {
    switch (a) {
    case Approach::Mono1Stage: return "mono-1stage";
    case Approach::Multi1Stage: return "multi-1stage";
    case Approach::Multi2Stage: return "multi-2stage";
    }
    return "?";
}

Approach parse_approach(const std::string& text) {
    if (text == "mono-1stage") return Approach::Mono1Stage;
    if (text == "multi-1stage") return Approach::Multi1Stage;
    if (text == "multi-2stage") return Approach::Multi2Stage;
    throw Error(ErrorCode::Parse, "unknown approach '" + text + "'");
}

bool in_category(Approach setup_approach, Approach category) {
    return static_cast<int>(setup_approach) <= static_cast<int>(category);
}

std::span<const Fraction> first_stage_ratios() { return kFirstStage; }
std::span<const Fraction> second_stage_ratios() { return kSecondStage; }

std::string canonical_id(const FactorTuple& f, const std::optional<TwoStageRatios>& ratios) {
    std::string id = "fC" + std::to_string(f.f_C) + "_fD" + std::to_string(f.f_D()) + "_fr" +
                     std::to_string(f.f_r) + "_fM" + std::to_string(f.f_M) + "_fk" +
                     std::to_string(f.f_k);
    if (ratios) {
        id += "_r1=" + ratios->r1.str() + "_r2=" + ratios->r2.str();
    }
    return id;
}

SetupSpec make_setup(const FactorTuple& factors, std::optional<TwoStageRatios> ratios) {
    SetupSpec s;
    s.factors = factors;
    s.derived = derive_single_stage(factors);
    if (ratios) {
        s.split = stage_split(ratios->r1, ratios->r2, s.derived.ratio);
        if (s.split->degenerate()) {
            throw Error(ErrorCode::InfeasibleSplit,
                        "two-stage setup needs r1 < r < r2 strictly (r=" + s.derived.ratio.str() + ")");
        }
        s.two_stage = ratios;
        s.approach = Approach::Multi2Stage;
    } else {
        s.approach = factors.f_r == 0 ? Approach::Mono1Stage : Approach::Multi1Stage;
    }
    s.id = canonical_id(factors, ratios);
    return s;
}

SetupSpec parse_setup_id(const std::string& id) {
    std::vector<std::string_view> parts;
    std::string_view rest(id);
    while (true) {
        auto pos = rest.find('_');
        parts.push_back(rest.substr(0, pos));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    if (parts.size() != 5 && parts.size() != 7) {
        throw Error(ErrorCode::Parse, "malformed setup id '" + id + "'");
    }
    const std::array<std::string_view, 5> prefixes = {"fC", "fD", "fr", "fM", "fk"};
    std::array<int, 5> values{};
    for (std::size_t i = 0; i < 5; ++i) {
        if (!parts[i].starts_with(prefixes[i])) {
            throw Error(ErrorCode::Parse, "malformed setup id '" + id + "'");
        }
        values[i] = parse_int_field(parts[i].substr(2), id);
    }
    FactorTuple f{values[2], values[3], values[4], values[0]};
    std::optional<TwoStageRatios> ratios;
    if (parts.size() == 7) {
        if (!parts[5].starts_with("r1=") || !parts[6].starts_with("r2=")) {
            throw Error(ErrorCode::Parse, "malformed setup id '" + id + "'");
        }
        ratios = TwoStageRatios{Fraction::parse(parts[5].substr(3)), Fraction::parse(parts[6].substr(3))};
    }
    SetupSpec s = make_setup(f, ratios);
    if (f.f_D() != values[1] || s.id != id) {
        throw Error(ErrorCode::Validation, "setup id '" + id + "' is not canonical (expected '" + s.id + "')");
    }
    return s;
}

std::vector<SetupSpec> enumerate_single_stage(const SearchRanges& ranges) {
    std::vector<SetupSpec> out;
    for (const auto& row : ranges.rows) {
        for (int f_C : row.compute_factors) {
            for (int f_r = row.f_r.lo; f_r < row.f_r.hi; ++f_r) {
                for (int f_M = row.f_M.lo; f_M < row.f_M.hi; ++f_M) {
                    for (int f_k = row.f_k.lo; f_k < row.f_k.hi; ++f_k) {
                        FactorTuple f{f_r, f_M, f_k, f_C};
                        if (row.f_D.contains(f.f_D())) {
                            out.push_back(make_setup(f));
                        }
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const SetupSpec& a, const SetupSpec& b) { return order_key(a) < order_key(b); });
    return out;
}

std::vector<SetupSpec> enumerate_two_stage(const SearchRanges& ranges) {
    std::vector<SetupSpec> out;
    for (const auto& base : enumerate_single_stage(ranges)) {
        const Fraction r = base.derived.ratio;
        for (const auto& r1 : kFirstStage) {
            for (const auto& r2 : kSecondStage) {
                if (r1 < r && r < r2) {
                    out.push_back(make_setup(base.factors, TwoStageRatios{r1, r2}));
                }
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const SetupSpec& a, const SetupSpec& b) { return order_key(a) < order_key(b); });
    return out;
}

std::vector<SetupSpec> enumerate_all(const SearchRanges& ranges) {
    auto out = enumerate_single_stage(ranges);
    auto two = enumerate_two_stage(ranges);
    out.insert(out.end(), std::make_move_iterator(two.begin()), std::make_move_iterator(two.end()));
    return out;
}

std::map<BudgetKey, std::vector<SetupSpec>> group_by_budget(std::span<const SetupSpec> setups) {
    std::map<BudgetKey, std::vector<SetupSpec>> groups;
    for (const auto& s : setups) {
        groups[{s.factors.f_C, s.factors.f_D()}].push_back(s);
    }
    return groups;
}

void write_setups_jsonl(std::ostream& out, std::span<const SetupSpec> setups) {
    for (const auto& s : setups) {
        out << setup_to_json(s).dump() << '\n';
    }
}

std::vector<SetupSpec> read_setups_jsonl(std::istream& in) {
    std::vector<SetupSpec> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, "setups line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            FactorTuple f{j.at("f_r").get<int>(), j.at("f_M").get<int>(), j.at("f_k").get<int>(),
                          j.at("f_C").get<int>()};
            std::optional<TwoStageRatios> ratios;
            if (j.contains("r1")) {
                ratios = TwoStageRatios{Fraction::parse(j.at("r1_exact").get<std::string>()),
                                        Fraction::parse(j.at("r2_exact").get<std::string>())};
            }
            SetupSpec s = make_setup(f, ratios);
            if (j.contains("id") && j.at("id").get<std::string>() != s.id) {
                throw Error(ErrorCode::Validation, "id '" + j.at("id").get<std::string>() +
                                                       "' does not match its factors ('" + s.id + "')");
            }
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, "setups line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(e.code(), "setups line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace sweepplan
