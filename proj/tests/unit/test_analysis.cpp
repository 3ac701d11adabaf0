// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/analysis.hpp"
#include "sweepplan/error.hpp"
#include "sweepplan/io.hpp"
#include "sweepplan/surrogate.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

using namespace sweepplan;

namespace {

std::vector<SetupSpec> grid(int f_C) {
    const int fc[] = {f_C};
    return enumerate_all(SearchRanges::defaults().restricted_to(fc));
}

ResultSet results_for(const std::vector<SetupSpec>& setups, const std::vector<LossRecord>& records) {
    return ingest(records, setups).results;
}

const CategoryMinima* find(const std::vector<CategoryMinima>& all, int f_C, int f_D) {
    for (const auto& m : all)
        if (m.f_C == f_C && m.f_D == f_D) return &m;
    return nullptr;
}

} // namespace

TEST_CASE("ingest rules") {
    const auto setups = grid(0);
    const std::string id = setups.front().id;
    std::istringstream csv("setup_id,language_pair,val_loss\n" + id + ",en-xx,2.0\n" + id +
                           ",en-xx,1.9\nfC9_fD0_fr0_fM0_fk0,en-xx,3.0\n\n" + id + ",en-yy,2.5\n");
    const auto rep = ingest_csv(csv, setups);
    CHECK(rep.duplicates == 1);
    REQUIRE(rep.rejected.size() == 1);
    CHECK(rep.rejected[0].line == 4);
    CHECK(rep.rejected[0].setup_id == "fC9_fD0_fr0_fM0_fk0");
    REQUIRE(rep.results.measurements.size() == 2);
    CHECK(rep.results.measurements[0].val_loss == 1.9);
    CHECK(rep.results.language_pairs() == std::vector<std::string>{"en-xx", "en-yy"});

    std::istringstream empty("setup_id,language_pair,val_loss\n");
    const auto none = ingest_csv(empty, setups);
    CHECK(none.results.measurements.empty());
    CHECK(none.rejected.empty());
    CHECK(ingest({}, setups).results.measurements.empty());
}

TEST_CASE("ingest errors carry locations") {
    const auto setups = grid(0);
    const std::string id = setups.front().id;
    auto code_of = [&](const std::string& text) {
        std::istringstream in(text);
        try {
            ingest_csv(in, setups);
        } catch (const Error& e) {
            return std::make_pair(e.code(), std::string(e.what()));
        }
        return std::make_pair(ErrorCode::Usage, std::string());
    };
    auto [c1, m1] = code_of("setup_id,language_pair,val_loss\n" + id + ",en-xx,abc\n");
    CHECK(c1 == ErrorCode::Parse);
    CHECK(m1.find("line 2") != std::string::npos);
    auto [c2, m2] = code_of("setup_id,language_pair,val_loss\n" + id + ",en-xx\n");
    CHECK(c2 == ErrorCode::Parse);
    auto [c3, m3] = code_of("setup_id,language_pair,val_loss\n" + id + ",en-xx,1.0\n" + id + ",en-xx,-1\n");
    CHECK(c3 == ErrorCode::Validation);
    CHECK(m3.find("line 3") != std::string::npos);
    auto [c4, m4] = code_of("id,pair,loss\n");
    CHECK(c4 == ErrorCode::Parse);
}

TEST_CASE("category minima match a brute-force argmin") {
    const auto setups = grid(-1);
    auto params = SurrogateParams::crossing_fixture();
    params.noise_sigma = 0.02;
    params.seed = 3;
    const auto records = generate_dataset(setups, params);
    const auto minima = category_minima(results_for(setups, records));

    std::map<std::pair<int, int>, double> mono, all;
    for (std::size_t i = 0; i < setups.size(); ++i) {
        const auto key = std::make_pair(setups[i].factors.f_C, setups[i].factors.f_D());
        const double l = records[i].val_loss;
        if (setups[i].approach == Approach::Mono1Stage) {
            auto [it, fresh] = mono.try_emplace(key, l);
            if (!fresh) it->second = std::min(it->second, l);
        }
        auto [it, fresh] = all.try_emplace(key, l);
        if (!fresh) it->second = std::min(it->second, l);
    }
    CHECK(minima.size() == all.size());
    for (const auto& m : minima) {
        REQUIRE(m.mono);
        REQUIRE(m.multi1);
        REQUIRE(m.multi2);
        CHECK(m.mono->loss == mono.at({m.f_C, m.f_D}));
        CHECK(m.multi2->loss == all.at({m.f_C, m.f_D}));
        CHECK(m.multi2->loss <= m.multi1->loss);
        CHECK(m.multi1->loss <= m.mono->loss);
    }
}

TEST_CASE("singleton and absent categories") {
    const auto setups = grid(0);
    const auto& multi = *std::find_if(setups.begin(), setups.end(),
                                      [](const SetupSpec& s) { return s.approach == Approach::Multi1Stage; });
    const auto minima = category_minima(results_for(setups, {{multi.id, "p", 2.5}}));
    REQUIRE(minima.size() == 1);
    CHECK_FALSE(minima[0].mono.has_value());
    CHECK(minima[0].multi1->loss == 2.5);
    CHECK(minima[0].multi2->loss == 2.5);

    const auto& mono = setups.front();
    const auto single = category_minima(results_for(setups, {{mono.id, "p", 3.0}}));
    CHECK(single[0].mono->loss == 3.0);
    CHECK(single[0].multi1->loss == 3.0);
    CHECK(single[0].multi2->loss == 3.0);
}

TEST_CASE("compute-optimal corpus") {
    const auto setups = grid(0);
    const auto k2 = make_setup({0, 1, 1, 0});
    const auto rs = results_for(setups, {{k2.id, "p", 2.0}});
    const auto est = estimate_compute_optimal(rs, "p", 0);
    CHECK(est.d_star == doctest::Approx(2 * k2.derived.target_tokens));

    const auto k1 = make_setup({0, 0, 0, 0});
    const auto tied = results_for(setups, {{k2.id, "p", 2.0}, {k1.id, "p", 2.0}});
    CHECK(estimate_compute_optimal(tied, "p", 0).setup_id == k1.id);

    CHECK_THROWS_AS(estimate_compute_optimal(tied, "p", -1), Error);

    // planted optimum: brute-force argmin over the surrogate grid
    const auto records = generate_dataset(setups, SurrogateParams{});
    double best = std::numeric_limits<double>::infinity();
    double planted = 0.0;
    for (std::size_t i = 0; i < setups.size(); ++i) {
        if (setups[i].approach == Approach::Mono1Stage && records[i].val_loss < best) {
            best = records[i].val_loss;
            planted = setups[i].derived.epochs * setups[i].derived.target_tokens;
        }
    }
    const auto got = estimate_compute_optimal(results_for(setups, records), "synthetic", 0);
    CHECK(std::abs(std::log2(got.d_star / planted)) <= 1.0);
}

TEST_CASE("threshold rules") {
    auto mk = [](int f_D, double mono, double multi2) {
        CategoryMinima m{"p", 0, f_D, 1e18, std::ldexp(1e9, f_D), CategoryBest{mono, "a"}, CategoryBest{mono, "a"},
                         CategoryBest{multi2, "b"}};
        return m;
    };
    const std::vector<CategoryMinima> all_win = {mk(-2, 3.0, 2.9), mk(-1, 2.8, 2.7), mk(0, 2.6, 2.5)};
    auto t = detect_threshold(all_win, 1e9);
    CHECK(t.crossing);
    CHECK(t.no_upper_crossing);
    CHECK(*t.f_D_low == 0);
    CHECK_FALSE(t.f_D_high.has_value());

    const std::vector<CategoryMinima> tie = {mk(-2, 3.0, 2.9), mk(-1, 2.8, 2.8), mk(0, 2.6, 2.6)};
    t = detect_threshold(tie, 4e9);
    CHECK(t.crossing);
    CHECK(*t.f_D_low == -2);
    CHECK(*t.f_D_high == -1);
    CHECK(*t.ratio_low == doctest::Approx(0.25 / 4));

    const std::vector<CategoryMinima> none = {mk(-1, 2.8, 2.8), mk(0, 2.6, 2.6)};
    CHECK_FALSE(detect_threshold(none, 1e9).crossing);

    // a margin larger than the gap removes the win
    CHECK_FALSE(detect_threshold(tie, 4e9, 0.2).crossing);
}

TEST_CASE("surrogate crossing lands in the expected band") {
    for (int f_C : {0, -2, -4}) {
        const auto setups = grid(f_C);
        const auto records = generate_dataset(setups, SurrogateParams::crossing_fixture());
        const auto rs = results_for(setups, records);
        const auto minima = category_minima(rs);
        const auto est = estimate_compute_optimal(rs, "synthetic", f_C);
        const auto t = detect_threshold(minima, est.d_star);
        REQUIRE(t.crossing);
        REQUIRE_FALSE(t.no_upper_crossing);
        CHECK(*t.ratio_low >= 1.0 / 16 - 1e-12);
        CHECK(*t.ratio_high <= 1.0 / 4 + 1e-12);

        // brute force: largest f_D with a strict two-stage win
        int largest = std::numeric_limits<int>::min();
        std::map<int, std::pair<double, double>> by_fd;
        for (std::size_t i = 0; i < setups.size(); ++i) {
            auto [it, fresh] = by_fd.try_emplace(setups[i].factors.f_D(), 1e300, 1e300);
            if (setups[i].approach == Approach::Mono1Stage) it->second.first = std::min(it->second.first, records[i].val_loss);
            it->second.second = std::min(it->second.second, records[i].val_loss);
        }
        for (const auto& [f_D, v] : by_fd)
            if (v.second < v.first) largest = f_D;
        CHECK(*t.f_D_low == largest);

        // extra records that are not group minima change nothing
        auto padded = records;
        for (std::size_t i = 0; i < setups.size(); i += 3) padded.push_back({setups[i].id, "synthetic", records[i].val_loss + 1.0});
        const auto again = detect_threshold(category_minima(results_for(setups, padded)), est.d_star);
        CHECK(*again.f_D_low == *t.f_D_low);
        CHECK(*again.f_D_high == *t.f_D_high);
    }
}

TEST_CASE("no crossing without the two-stage benefit") {
    auto params = SurrogateParams::crossing_fixture();
    params.gamma = 0.0;
    const auto setups = grid(0);
    const auto rs = results_for(setups, generate_dataset(setups, params));
    const auto est = estimate_compute_optimal(rs, "synthetic", 0);
    CHECK_FALSE(detect_threshold(category_minima(rs), est.d_star).crossing);
}

TEST_CASE("optimal scale table") {
    const auto setups = grid(0);
    std::vector<LossRecord> records;
    for (const auto& s : setups) {
        const double d = s.factors.f_M - 1.0;
        records.push_back({s.id, "p", 1.0 + d * d + 0.001 * s.factors.f_r + 0.0001 * s.factors.f_k});
    }
    const auto table = optimal_scale_table(results_for(setups, records));
    std::map<int, std::pair<double, int>> brute; // f_D -> (loss, f_M)
    for (std::size_t i = 0; i < setups.size(); ++i) {
        auto [it, fresh] = brute.try_emplace(setups[i].factors.f_D(), records[i].val_loss, setups[i].factors.f_M);
        if (records[i].val_loss < it->second.first) it->second = {records[i].val_loss, setups[i].factors.f_M};
    }
    CHECK(table.winners.size() == brute.size());
    for (const auto& w : table.winners) {
        CHECK(w.f_M == 1);
        CHECK(w.f_M == brute.at(w.f_D).second);
    }
    REQUIRE(table.fold_changes.size() == 1);
    CHECK(table.fold_changes[0].fold_change == 1.0);

    const auto a = make_setup({0, 0, 0, 0});  // f_D = 0
    const auto b = make_setup({0, 1, 0, 0});  // f_D = 1
    const auto two = optimal_scale_table(results_for(setups, {{a.id, "p", 2.0}, {b.id, "p", 2.0}}));
    CHECK(two.fold_changes[0].fold_change == 2.0);

    const auto one = optimal_scale_table(results_for(setups, {{b.id, "p", 2.0}}));
    REQUIRE(one.winners.size() == 1);
    CHECK(one.winners[0].f_M == 1);
}

TEST_CASE("analysis reports are deterministic") {
    const auto setups = grid(-3);
    auto params = SurrogateParams::crossing_fixture();
    params.noise_sigma = 0.01;
    const auto records = generate_dataset(setups, params);
    const auto rep1 = ingest(records, setups);
    const auto rep2 = ingest(records, setups);
    CHECK(report_to_json(analyze(rep1.results), rep1).dump() == report_to_json(analyze(rep2.results), rep2).dump());
}

TEST_CASE("fit inputs from results") {
    const auto setups = enumerate_all(SearchRanges::defaults());
    const auto rs = results_for(setups, generate_dataset(setups, SurrogateParams{}));
    const auto fits = fit_epoch_curves(rs, "synthetic", Approach::Mono1Stage);
    CHECK_FALSE(fits.fits.empty());
    const auto ratio = ratio_inputs(rs, "synthetic");
    CHECK(ratio.points.size() > 0);
    for (const auto& p : ratio.points) {
        const double f_C = std::log2(p.model_scale * p.total_tokens / 1e18);
        CHECK(f_C == doctest::Approx(std::round(f_C)).epsilon(1e-9));
    }
    const auto fit = fit_ratio_power_law(ratio.points);
    CHECK(fit.beta == doctest::Approx(-0.101).epsilon(1e-9));
}
