// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/analysis.hpp"

#include "sweepplan/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace sweepplan {

namespace {

// Deterministic preference between two measurements: lower loss, then
// smaller k, then smaller f_M, then lexicographic id.
bool better(double loss, const SetupSpec& s, double other_loss, const SetupSpec& other) {
    if (loss != other_loss) return loss < other_loss;
    if (s.factors.f_k != other.factors.f_k) return s.factors.f_k < other.factors.f_k;
    if (s.factors.f_M != other.factors.f_M) return s.factors.f_M < other.factors.f_M;
    return s.id < other.id;
}

struct Candidate {
    double loss = 0.0;
    const SetupSpec* setup = nullptr;

    void offer(double l, const SetupSpec& s) {
        if (setup == nullptr || better(l, s, loss, *setup)) {
            loss = l;
            setup = &s;
        }
    }
    std::optional<CategoryBest> result() const {
        if (setup == nullptr) return std::nullopt;
        return CategoryBest{loss, setup->id};
    }
};

struct NumberedRecord {
    std::size_t line;
    LossRecord record;
};

IngestReport ingest_numbered(const std::vector<NumberedRecord>& rows, std::span<const SetupSpec> setups) {
    IngestReport report;
    report.results.setups.assign(setups.begin(), setups.end());
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(setups.size());
    for (std::size_t i = 0; i < setups.size(); ++i) index.emplace(setups[i].id, i);

    std::map<std::pair<std::string, std::string>, Measurement> kept; // (pair, id)
    for (const auto& [line, rec] : rows) {
        if (!std::isfinite(rec.val_loss) || rec.val_loss <= 0.0) {
            std::ostringstream msg;
            msg << "line " << line << ": val_loss must be positive and finite, got " << rec.val_loss;
            throw Error(ErrorCode::Validation, msg.str());
        }
        const auto it = index.find(rec.setup_id);
        if (it == index.end()) {
            report.rejected.push_back({line, rec.setup_id, "unknown setup id"});
            continue;
        }
        auto [pos, inserted] = kept.try_emplace({rec.language_pair, rec.setup_id},
                                                Measurement{it->second, rec.language_pair, rec.val_loss});
        if (!inserted) {
            ++report.duplicates;
            pos->second.val_loss = std::min(pos->second.val_loss, rec.val_loss);
        }
    }
    report.results.measurements.reserve(kept.size());
    for (auto& [key, m] : kept) report.results.measurements.push_back(std::move(m));
    return report;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string fmt_loss(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

void write_results_csv(std::ostream& out, std::span<const LossRecord> records) {
    out << kResultsHeader << '\n';
    for (const auto& r : records) {
        out << r.setup_id << ',' << r.language_pair << ',' << fmt_loss(r.val_loss) << '\n';
    }
}

std::vector<std::string> ResultSet::language_pairs() const {
    std::vector<std::string> out;
    for (const auto& m : measurements) {
        if (out.empty() || out.back() != m.language_pair) out.push_back(m.language_pair);
    }
    return out;
}

std::vector<const Measurement*> ResultSet::for_pair(const std::string& pair) const {
    std::vector<const Measurement*> out;
    for (const auto& m : measurements) {
        if (pair.empty() || m.language_pair == pair) out.push_back(&m);
    }
    return out;
}

IngestReport ingest(std::span<const LossRecord> records, std::span<const SetupSpec> setups) {
    std::vector<NumberedRecord> rows;
    rows.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) rows.push_back({i + 1, records[i]});
    return ingest_numbered(rows, setups);
}

IngestReport ingest_csv(std::istream& in, std::span<const SetupSpec> setups) {
    std::vector<NumberedRecord> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line != kResultsHeader) {
                throw Error(ErrorCode::Parse, "line 1: expected header '" + std::string(kResultsHeader) +
                                                  "', got '" + line + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 3) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                              std::to_string(fields.size()));
        }
        double loss = 0.0;
        const auto& text = fields[2];
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), loss);
        if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad val_loss '" + text + "'");
        }
        if (fields[0].empty()) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": empty setup_id");
        }
        rows.push_back({line_no, LossRecord{fields[0], fields[1], loss}});
    }
    return ingest_numbered(rows, setups);
}

// ---------------------------------------------------------------------------

const std::optional<CategoryBest>& CategoryMinima::at(Approach category) const {
    switch (category) {
    case Approach::Mono1Stage: return mono;
    case Approach::Multi1Stage: return multi1;
    case Approach::Multi2Stage: break;
    }
    return multi2;
}

std::vector<CategoryMinima> category_minima(const ResultSet& results) {
    using Key = std::tuple<std::string, int, int>;
    struct Group {
        double compute = 0.0;
        double target_tokens = 0.0;
        Candidate mono, multi1, multi2;
    };
    std::map<Key, Group> groups;
    for (const auto& m : results.measurements) {
        const auto& s = results.setup_of(m);
        auto& g = groups[{m.language_pair, s.factors.f_C, s.factors.f_D()}];
        g.compute = s.derived.compute;
        g.target_tokens = s.derived.target_tokens;
        if (in_category(s.approach, Approach::Mono1Stage)) g.mono.offer(m.val_loss, s);
        if (in_category(s.approach, Approach::Multi1Stage)) g.multi1.offer(m.val_loss, s);
        g.multi2.offer(m.val_loss, s);
    }

    std::vector<CategoryMinima> out;
    out.reserve(groups.size());
    for (const auto& [key, g] : groups) {
        CategoryMinima cm{std::get<0>(key), std::get<1>(key), std::get<2>(key), g.compute, g.target_tokens,
                          g.mono.result(), g.multi1.result(), g.multi2.result()};
        const bool nested = (!cm.mono || (cm.multi1 && cm.multi1->loss <= cm.mono->loss)) &&
                            (!cm.multi1 || (cm.multi2 && cm.multi2->loss <= cm.multi1->loss));
        if (!nested) {
            throw Error(ErrorCode::Validation, "category nesting violated at f_C=" + std::to_string(cm.f_C) +
                                                   " f_D=" + std::to_string(cm.f_D));
        }
        out.push_back(std::move(cm));
    }
    return out;
}

ComputeOptimalEstimate estimate_compute_optimal(const ResultSet& results, const std::string& pair, int f_C) {
    Candidate best;
    for (const auto* m : results.for_pair(pair)) {
        const auto& s = results.setup_of(*m);
        if (s.factors.f_C == f_C && s.approach == Approach::Mono1Stage) best.offer(m->val_loss, s);
    }
    if (best.setup == nullptr) {
        throw Error(ErrorCode::InsufficientData,
                    "no mono-1stage results at f_C=" + std::to_string(f_C) + " for pair '" + pair + "'");
    }
    const auto& d = best.setup->derived;
    return {pair, f_C, d.compute, d.epochs * d.target_tokens, best.setup->id};
}

ThresholdReport detect_threshold(std::span<const CategoryMinima> minima, double d_star, double epsilon) {
    ThresholdReport rep;
    rep.d_star = d_star;
    std::vector<const CategoryMinima*> compared;
    for (const auto& m : minima) {
        if (m.mono && m.multi2) compared.push_back(&m);
    }
    if (!minima.empty()) {
        rep.language_pair = minima.front().language_pair;
        rep.f_C = minima.front().f_C;
        rep.compute = minima.front().compute;
    }
    std::sort(compared.begin(), compared.end(), [](auto* a, auto* b) { return a->f_D < b->f_D; });

    std::optional<std::size_t> last_win;
    for (std::size_t i = 0; i < compared.size(); ++i) {
        if (compared[i]->multi2->loss < compared[i]->mono->loss - epsilon) last_win = i;
    }
    if (!last_win) return rep;

    const auto* low = compared[*last_win];
    rep.crossing = true;
    rep.f_D_low = low->f_D;
    rep.target_tokens_low = low->target_tokens;
    rep.ratio_low = low->target_tokens / d_star;
    if (*last_win + 1 == compared.size()) {
        rep.no_upper_crossing = true;
    } else {
        const auto* high = compared[*last_win + 1];
        rep.f_D_high = high->f_D;
        rep.target_tokens_high = high->target_tokens;
        rep.ratio_high = high->target_tokens / d_star;
    }
    return rep;
}

ScaleTable optimal_scale_table(const ResultSet& results, Approach category) {
    using CellKey = std::tuple<std::string, int, int, int>;
    std::map<CellKey, Candidate> cells;
    for (const auto& m : results.measurements) {
        const auto& s = results.setup_of(m);
        if (!in_category(s.approach, category)) continue;
        cells[{m.language_pair, s.factors.f_C, s.factors.f_D(), s.factors.f_M}].offer(m.val_loss, s);
    }

    ScaleTable table;
    using ColKey = std::tuple<std::string, int, int>;
    std::map<ColKey, Candidate> columns;
    for (const auto& [key, c] : cells) {
        const auto& [pair, f_C, f_D, f_M] = key;
        table.cells.push_back({pair, f_C, f_D, f_M, c.loss, c.setup->id});
        columns[{pair, f_C, f_D}].offer(c.loss, *c.setup);
    }

    using RowKey = std::pair<std::string, int>;
    std::map<RowKey, std::pair<int, int>> spans;
    for (const auto& [key, c] : columns) {
        const auto& [pair, f_C, f_D] = key;
        const auto& s = *c.setup;
        table.winners.push_back({pair, f_C, f_D, s.factors.f_M, s.derived.model_scale, c.loss, s.id});
        auto [it, inserted] = spans.try_emplace({pair, f_C}, s.factors.f_M, s.factors.f_M);
        if (!inserted) {
            it->second.first = std::min(it->second.first, s.factors.f_M);
            it->second.second = std::max(it->second.second, s.factors.f_M);
        }
    }
    for (const auto& [key, span] : spans) {
        // M = M0 / 2^f_M, so the extreme winners differ by 2^(f_M_max - f_M_min)
        table.fold_changes.push_back(
            {key.first, key.second, std::exp2(span.second - span.first), span.first, span.second});
    }
    return table;
}

// ---------------------------------------------------------------------------

std::vector<EpochCurve> epoch_curves(const ResultSet& results, const std::string& pair, Approach category) {
    std::map<std::pair<int, int>, std::map<int, Candidate>> best;
    std::map<std::pair<int, int>, const SetupSpec*> any;
    for (const auto* m : results.for_pair(pair)) {
        const auto& s = results.setup_of(*m);
        if (!in_category(s.approach, category)) continue;
        const std::pair<int, int> key{s.factors.f_C, s.factors.f_D()};
        best[key][s.factors.f_k].offer(m->val_loss, s);
        any.emplace(key, &s);
    }
    std::vector<EpochCurve> out;
    for (const auto& [key, by_k] : best) {
        const auto& d = any.at(key)->derived;
        EpochCurve curve{key.first, key.second, d.compute, d.target_tokens, {}};
        for (const auto& [f_k, c] : by_k) curve.points.push_back({static_cast<double>(f_k), c.loss});
        out.push_back(std::move(curve));
    }
    return out;
}

EpochFitSummary fit_epoch_curves(const ResultSet& results, const std::string& pair, Approach category) {
    EpochFitSummary summary;
    for (auto& curve : epoch_curves(results, pair, category)) {
        if (curve.points.size() < 3) {
            ++summary.underdetermined;
            continue;
        }
        auto fit = fit_epoch_quadratic(curve.points);
        summary.fits.push_back({std::move(curve), fit});
    }
    return summary;
}

KStarInputs kstar_inputs(const EpochFitSummary& fits) {
    KStarInputs in;
    for (const auto& f : fits.fits) {
        if (f.fit.extrapolated) {
            ++in.skipped_extrapolated;
            continue;
        }
        in.points.push_back({f.curve.compute, static_cast<double>(f.curve.f_D), f.fit.f_k_star});
    }
    return in;
}

RatioInputs ratio_inputs(const ResultSet& results, const std::string& pair) {
    std::map<std::pair<double, double>, std::vector<RatioPoint>> groups;
    for (const auto* m : results.for_pair(pair)) {
        const auto& s = results.setup_of(*m);
        if (s.is_two_stage() || s.factors.f_k != 0) continue;
        const auto& d = s.derived;
        groups[{d.model_scale, d.total_tokens}].push_back(
            {d.model_scale, d.total_tokens, d.ratio.to_double(), m->val_loss});
    }
    RatioInputs in;
    for (const auto& [key, pts] : groups) {
        std::set<double> ratios;
        for (const auto& p : pts) ratios.insert(p.ratio);
        if (ratios.size() < 2) {
            ++in.dropped_groups;
            continue;
        }
        in.points.insert(in.points.end(), pts.begin(), pts.end());
    }
    return in;
}

AnalysisReport analyze(const ResultSet& results, double epsilon) {
    AnalysisReport report;
    report.epsilon = epsilon;
    const auto minima = category_minima(results);
    const auto scales = optimal_scale_table(results);
    for (const auto& pair : results.language_pairs()) {
        PairAnalysis pa;
        pa.language_pair = pair;
        for (const auto& m : minima) {
            if (m.language_pair == pair) pa.minima.push_back(m);
        }
        std::set<int> budgets;
        for (const auto& m : pa.minima) {
            if (m.mono) budgets.insert(m.f_C);
        }
        for (auto it = budgets.rbegin(); it != budgets.rend(); ++it) {
            const int f_C = *it;
            const auto est = estimate_compute_optimal(results, pair, f_C);
            std::vector<CategoryMinima> row;
            for (const auto& m : pa.minima) {
                if (m.f_C == f_C) row.push_back(m);
            }
            pa.compute_optimal.push_back(est);
            pa.thresholds.push_back(detect_threshold(row, est.d_star, epsilon));
        }
        for (const auto& c : scales.cells) {
            if (c.language_pair == pair) pa.scales.cells.push_back(c);
        }
        for (const auto& w : scales.winners) {
            if (w.language_pair == pair) pa.scales.winners.push_back(w);
        }
        for (const auto& f : scales.fold_changes) {
            if (f.language_pair == pair) pa.scales.fold_changes.push_back(f);
        }
        report.pairs.push_back(std::move(pa));
    }
    return report;
}

} // namespace sweepplan
