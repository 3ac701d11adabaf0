// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/error.hpp"
#include "sweepplan/search_space.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

using namespace sweepplan;

namespace {

// Independent nested-loop count over the published table rows.
struct Row {
    int fc_lo, fc_hi, fm_lo, fm_hi, fd_lo, fd_hi;
};
const Row kRows[] = {{0, 0, -1, 5, -5, 2}, {-2, -1, 0, 5, -6, 1}, {-4, -3, 1, 6, -7, 0}};

int brute_single(int fc_only, bool all) {
    int n = 0;
    for (const auto& row : kRows)
        for (int fc = row.fc_lo; fc <= row.fc_hi; ++fc) {
            if (!all && fc != fc_only) continue;
            for (int fr = 0; fr < 4; ++fr)
                for (int fm = row.fm_lo; fm < row.fm_hi; ++fm)
                    for (int fk = 0; fk < 10; ++fk) {
                        const int fd = -fr + fm - fk + fc;
                        if (fd >= row.fd_lo && fd < row.fd_hi) ++n;
                    }
        }
    return n;
}

int variants_for(double r) {
    const double r1s[] = {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0};
    const double r2s[] = {0.25, 0.5, 0.75, 1.0};
    int n = 0;
    for (double a : r1s)
        for (double b : r2s)
            if (a < r && r < b) ++n;
    return n;
}

} // namespace

TEST_CASE("single-stage count matches a brute-force loop") {
    const int oracle = brute_single(0, false);
    CHECK(oracle == 134);
    const int fc0[] = {0};
    const auto setups = enumerate_single_stage(SearchRanges::defaults().restricted_to(fc0));
    CHECK(static_cast<int>(setups.size()) == oracle);
    CHECK(static_cast<int>(enumerate_single_stage(SearchRanges::defaults()).size()) == brute_single(0, true));
}

TEST_CASE("two-stage variants per ratio") {
    CHECK(variants_for(0.25) == 12);
    CHECK(variants_for(1.0) == 0);

    const auto two = enumerate_two_stage(SearchRanges::defaults());
    std::map<std::string, int> per_base;
    for (const auto& s : two) {
        REQUIRE(s.two_stage.has_value());
        CHECK(s.two_stage->r1 < s.derived.ratio);
        CHECK(s.derived.ratio < s.two_stage->r2);
        CHECK(s.approach == Approach::Multi2Stage);
        ++per_base[canonical_id(s.factors, std::nullopt)];
    }
    std::size_t expected_total = 0;
    for (const auto& base : enumerate_single_stage(SearchRanges::defaults())) {
        const int want = variants_for(base.derived.ratio.to_double());
        expected_total += static_cast<std::size_t>(want);
        const auto it = per_base.find(base.id);
        CHECK((it == per_base.end() ? 0 : it->second) == want);
    }
    CHECK(two.size() == expected_total);
    CHECK(two.size() == 4664);
}

TEST_CASE("factor identity holds on the full enumeration") {
    const auto all = enumerate_all(SearchRanges::defaults());
    CHECK(all.size() == 586 + 4664);
    int violations = 0;
    for (const auto& s : all) {
        if (!s.derived.budget_identity_holds()) ++violations;
        if (s.split) {
            if (s.split->average_ratio() != s.derived.ratio) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("budget groups at f_C = 0") {
    const int fc0[] = {0};
    const auto single = enumerate_single_stage(SearchRanges::defaults().restricted_to(fc0));
    const auto groups = group_by_budget(single);
    CHECK(groups.size() == 7);
    for (const auto& [key, members] : groups) {
        int n = 0;
        for (int fr = 0; fr < 4; ++fr)
            for (int fm = -1; fm < 5; ++fm)
                for (int fk = 0; fk < 10; ++fk)
                    if (-fr + fm - fk == key.second) ++n;
        CHECK(static_cast<int>(members.size()) == n);
    }
}

TEST_CASE("approach categories nest") {
    CHECK(in_category(Approach::Mono1Stage, Approach::Mono1Stage));
    CHECK(in_category(Approach::Mono1Stage, Approach::Multi2Stage));
    CHECK(in_category(Approach::Multi1Stage, Approach::Multi2Stage));
    CHECK_FALSE(in_category(Approach::Multi1Stage, Approach::Mono1Stage));
    CHECK_FALSE(in_category(Approach::Multi2Stage, Approach::Multi1Stage));
    CHECK(parse_approach("multi-2stage") == Approach::Multi2Stage);
    CHECK_THROWS_AS(parse_approach("bilingual"), Error);

    CHECK(make_setup({0, 1, 2, 0}).approach == Approach::Mono1Stage);
    CHECK(make_setup({1, 1, 2, 0}).approach == Approach::Multi1Stage);
}

TEST_CASE("ids round-trip") {
    const auto all = enumerate_all(SearchRanges::defaults());
    std::set<std::string> ids;
    for (const auto& s : all) {
        ids.insert(s.id);
        const auto back = parse_setup_id(s.id);
        CHECK(back.factors == s.factors);
        CHECK(back.two_stage == s.two_stage);
    }
    CHECK(ids.size() == all.size());
    CHECK(make_setup({2, 0, 1, 0}, TwoStageRatios{Fraction(1, 8), Fraction(1, 2)}).id ==
          "fC0_fD-3_fr2_fM0_fk1_r1=1/8_r2=1/2");
    CHECK_THROWS_AS(parse_setup_id("fC0_fDx"), Error);
    CHECK_THROWS_AS(make_setup({2, 0, 1, 0}, TwoStageRatios{Fraction(1, 4), Fraction(1, 2)}), Error);
}

TEST_CASE("setups JSONL round-trip") {
    const int fc[] = {-1};
    const auto all = enumerate_all(SearchRanges::defaults().restricted_to(fc));
    std::stringstream ss;
    write_setups_jsonl(ss, all);
    const auto back = read_setups_jsonl(ss);
    REQUIRE(back.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(back[i].id == all[i].id);

    std::stringstream bad("{\"f_r\": 0, \"f_M\": 1}\n");
    CHECK_THROWS_AS(read_setups_jsonl(bad), Error);
}
