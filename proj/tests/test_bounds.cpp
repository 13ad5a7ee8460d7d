#include <catch2/catch_amalgamated.hpp>

#include "defcast/bounds.hpp"
#include "defcast/rng.hpp"

using namespace defcast;
using Catch::Approx;

TEST_CASE("theorem-1 bound formula") {
    CHECK(bound_thm1(100, 10) == Approx(21.4597).margin(1e-4));
    CHECK(bound_thm1(500, 1) == 0.0);
    CHECK(bound_thm1(400, 7) == Approx(2.0 * bound_thm1(100, 7)).epsilon(1e-12));
    CHECK_THROWS_AS(bound_thm1(0, 4), std::invalid_argument);
}

TEST_CASE("eq6 bound formula") {
    CHECK(bound_eq6(10000, 0.1) == Approx(1003.49).margin(1e-2));
    CHECK(bound_eq6(49, 1.0) == Approx(49.0));  // 7 sqrt(T)
    CHECK(bound_eq6(1, std::exp(-1.0)) == Approx(9.0).epsilon(1e-12));
    CHECK_THROWS_AS(bound_eq6(100, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bound_eq6(100, 1.5), std::invalid_argument);
}

TEST_CASE("eq6 monotonicity") {
    double prev = 1e300;
    for (double eps : {0.01, 0.05, 0.1, 0.5, 1.0}) {
        double b = bound_eq6(1000, eps);
        CHECK(b <= prev);
        prev = b;
    }
    CHECK(bound_eq6(2000, 0.1) > bound_eq6(1000, 0.1));
    CHECK(bound_thm1(2000, 8) > bound_thm1(1000, 8));
    CHECK(bound_thm1(1000, 16) > bound_thm1(1000, 8));
}

TEST_CASE("reference bound formulas") {
    SECTION("eq9") {
        CHECK(bound_eq9(100, 10) == Approx(21.4597 + 0.5365).margin(2e-4));
    }
    SECTION("eq10 matches its closed form") {
        double ln2 = std::log(2.0);
        double expected = std::sqrt(1.0 + ln2) *
                          std::sqrt(3 * 26 * 100.0 + (16 * ln2 * ln2 / 0.5) * (10.2 / 0.25 + ln2));
        CHECK(bound_eq10(100, 2, 0.5, 0.5) == Approx(expected).epsilon(1e-12));
        CHECK_THROWS_AS(bound_eq10(100, 2, 0.5, 0.6), std::invalid_argument);
    }
    SECTION("kalnishkan-vyugin") {
        double t = 400, eps = 0.2;
        CHECK(bound_kv(t, eps, 1.0) ==
              Approx(std::sqrt(t) * std::log(1 / eps) + std::sqrt(t)).epsilon(1e-12));
    }
    SECTION("aggregating algorithm form") {
        CHECK(bound_aa(10.0, 0.5, 1.5, 2.0) ==
              Approx(1.5 * 10 + (1.5 / 2.0) * std::log(2.0)).epsilon(1e-12));
    }
    SECTION("eq4 reference guarded at T >= 16") {
        CHECK_THROWS_AS(bound_eq4_reference(15, 0.1), std::invalid_argument);
        CHECK(bound_eq4_reference(10000, 0.1) > 0.0);
    }
    SECTION("selector dispatch") {
        BoundParams params;
        params.t = 100;
        params.n = 10;
        params.eps = 0.1;
        params.delta = 0.5;
        CHECK(reference_bounds(params, RefBound::eq9) == Approx(bound_eq9(100, 10)));
        CHECK(reference_bounds(params, RefBound::eq10) == Approx(bound_eq10(100, 10, 0.1, 0.5)));
    }
}

TEST_CASE("remark-2 divergence collapses to ln(N/k) for uniform weights") {
    const int n = 12;
    Vec p(static_cast<size_t>(n), 1.0 / n);
    for (int k : {1, 3, 6, 12}) {
        Vec u(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < k; ++i) u[static_cast<size_t>(i)] = 1.0 / k;
        double divergence = 0.0;
        for (int i = 0; i < k; ++i) divergence += u[static_cast<size_t>(i)] *
                                                  std::log(u[static_cast<size_t>(i)] * n);
        CHECK(divergence == Approx(std::log(static_cast<double>(n) / k)).margin(1e-12));
        double t = 250;
        CHECK(bound_remark2(t, u, p) ==
              Approx(2 * std::sqrt(t * std::log(static_cast<double>(n) / k)) + 7 * std::sqrt(t))
                  .epsilon(1e-12));
    }
}

TEST_CASE("discrete eq3 check") {
    std::vector<EtaNode> grid = theorem2_grid(1e-4, 32);
    SECTION("no regret keeps the value below one") {
        Eq3Check chk = check_eq3_discrete(50.0, 50.0, 100, grid, 0.1);
        CHECK(chk.ok);
        CHECK(chk.value <= 1.0);
    }
    SECTION("fabricated over-regret traces must fail") {
        double t = 100, eps = 0.1;
        double forged_gap = 2.0 * std::sqrt(t * std::log(1 / eps)) + 40.0;
        Eq3Check chk = check_eq3_discrete(forged_gap, 0.0, t, grid, eps);
        CHECK_FALSE(chk.ok);
        CHECK(chk.value > 1.0 / eps);
    }
    SECTION("grid required") {
        CHECK_THROWS_AS(check_eq3_discrete(1, 0, 10, std::vector<EtaNode>{}, 0.5),
                        std::invalid_argument);
    }
}

TEST_CASE("crossover against the normalhedge bound") {
    std::vector<double> delta_grid = default_delta_grid();
    SECTION("eq6 beats eq10 at the reference point") {
        CHECK(bound_eq6(1e5, 0.05) < min_bound_eq10(1e5, 100, 0.05, delta_grid));
    }
    SECTION("crossover exists and is finite") {
        for (int n : {2, 10, 100}) {
            for (double eps : {0.01, 0.1, 0.5}) {
                CrossoverResult res = crossover(n, eps, delta_grid);
                REQUIRE(res.found);
                CHECK(res.t_star > 1.0);
                CHECK(res.t_star < 1e16);
                // The predicate flips at t_star.
                CHECK(bound_eq6(res.t_star, eps) <=
                      min_bound_eq10(res.t_star, n, eps, delta_grid));
                CHECK(bound_eq6(res.t_star * 1.01 + 10, eps) >
                      min_bound_eq10(res.t_star * 1.01 + 10, n, eps, delta_grid));
            }
        }
    }
    SECTION("t_star grows with N") {
        double prev = 0.0;
        for (int n : {10, 100, 1000}) {
            CrossoverResult res = crossover(n, 0.01, delta_grid);
            REQUIRE(res.found);
            CHECK(res.t_star > prev);
            prev = res.t_star;
        }
    }
}

TEST_CASE("bound evaluators are pure on their domains") {
    CounterRng rng(17, 17);
    for (int rep = 0; rep < 100; ++rep) {
        double t = 1 + rng.uniform(0, 1e6);
        int n = 2 + static_cast<int>(rng.next_below(1000));
        double eps = rng.uniform(1e-4, 1.0);
        double delta = rng.uniform(1e-3, 0.5);
        CHECK(std::isfinite(bound_thm1(t, n)));
        CHECK(std::isfinite(bound_eq6(t, eps)));
        CHECK(std::isfinite(bound_eq9(t, n)));
        CHECK(std::isfinite(bound_eq10(t, n, eps, delta)));
        CHECK(std::isfinite(bound_kv(t, eps, 0.5 + rng.next_double())));
    }
}
