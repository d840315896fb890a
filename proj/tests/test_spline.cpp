#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffmn/rng.hpp"
#include "diffmn/spline.hpp"

using namespace diffmn;

namespace {

// Independent natural-cubic-spline oracle: set up the full linear system for
// the knot second derivatives and solve it by dense Gaussian elimination.
struct OracleSpline {
    std::vector<double> t, y, M;

    OracleSpline(std::vector<double> t_, std::vector<double> y_) : t(std::move(t_)), y(std::move(y_)) {
        const int n = static_cast<int>(t.size());
        std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
        A[0][0] = 1.0;
        A[n - 1][n - 1] = 1.0;
        for (int i = 1; i < n - 1; ++i) {
            const double h0 = t[i] - t[i - 1];
            const double h1 = t[i + 1] - t[i];
            A[i][i - 1] = h0;
            A[i][i] = 2.0 * (h0 + h1);
            A[i][i + 1] = h1;
            A[i][n] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for (int col = 0; col < n; ++col) {
            int piv = col;
            for (int r = col + 1; r < n; ++r)
                if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
            std::swap(A[col], A[piv]);
            for (int r = 0; r < n; ++r) {
                if (r == col || A[r][col] == 0.0) continue;
                const double f = A[r][col] / A[col][col];
                for (int c = col; c <= n; ++c) A[r][c] -= f * A[col][c];
            }
        }
        M.resize(n);
        for (int i = 0; i < n; ++i) M[i] = A[i][n] / A[i][i];
    }

    double eval(double x) const {
        int i = 0;
        while (i + 2 < static_cast<int>(t.size()) && x >= t[i + 1]) ++i;
        const double h = t[i + 1] - t[i];
        const double a = y[i];
        const double b = (y[i + 1] - y[i]) / h - h * (2.0 * M[i] + M[i + 1]) / 6.0;
        const double c = M[i] / 2.0;
        const double d = (M[i + 1] - M[i]) / (6.0 * h);
        const double dt = x - t[i];
        return a + dt * (b + dt * (c + dt * d));  // Horner form
    }
};

IrregularSeries one_channel(std::vector<double> times, std::vector<double> vals) {
    IrregularSeries s;
    s.id = "t";
    s.times = std::move(times);
    s.channels = 1;
    s.values = std::move(vals);
    s.mask.assign(s.values.size(), 1);
    return s;
}

}  // namespace

TEST_CASE("two-point channel is linear: X(0.5) = 0.5") {
    auto path = fit_control_path(one_channel({0.0, 1.0}, {0.0, 1.0}));
    CHECK(path.eval(0.5)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(path.deriv(0.25)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(path.deriv(0.75)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("three-point fit matches dense tridiagonal oracle coefficients") {
    auto path = fit_control_path(one_channel({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}));
    OracleSpline oracle({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
    const auto& cs = path.channel(0).coeffs();
    REQUIRE(cs.size() == 2);
    for (int i = 0; i < 2; ++i) {
        const double h = 0.5;
        const double b = (oracle.y[i + 1] - oracle.y[i]) / h - h * (2.0 * oracle.M[i] + oracle.M[i + 1]) / 6.0;
        CHECK(cs[i].a == doctest::Approx(oracle.y[i]).epsilon(1e-12));
        CHECK(cs[i].b == doctest::Approx(b).epsilon(1e-12));
        CHECK(cs[i].c == doctest::Approx(oracle.M[i] / 2.0).epsilon(1e-12));
        CHECK(cs[i].d == doctest::Approx((oracle.M[i + 1] - oracle.M[i]) / (6.0 * h)).epsilon(1e-12));
    }
}

TEST_CASE("interpolation exactness at all knots") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + rng.uniform_int(10);
        std::vector<double> t(n), y(n);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += 0.05 + rng.uniform();
            t[i] = acc;
            y[i] = rng.normal(0.0, 2.0);
        }
        auto path = fit_control_path(one_channel(t, y));
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(path.eval(t[i])[0] - y[i]) <= 1e-9);
    }
}

TEST_CASE("eval on 101 uniform points matches oracle polynomial evaluation") {
    std::vector<double> t = {0.0, 0.15, 0.4, 0.55, 0.8, 1.0};
    std::vector<double> y = {0.2, -0.5, 1.3, 0.9, -1.1, 0.4};
    auto path = fit_control_path(one_channel(t, y));
    OracleSpline oracle(t, y);
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        CHECK(path.eval(x)[0] == doctest::Approx(oracle.eval(x)).epsilon(1e-10));
    }
}

TEST_CASE("C1/C2 continuity at interior knots within 1e-9") {
    Rng rng(9);
    std::vector<double> t = {0.0, 0.2, 0.35, 0.6, 0.77, 1.0};
    std::vector<double> y(6);
    for (auto& v : y) v = rng.normal(0.0, 1.0);
    auto path = fit_control_path(one_channel(t, y));
    // Left/right limits at each interior knot: the left segment's polynomial
    // extended to its right endpoint against the right segment's start.
    const auto& cs = path.channel(0).coeffs();
    for (size_t i = 0; i + 1 < cs.size(); ++i) {
        const double h = t[i + 1] - t[i];
        const double v_end = cs[i].a + h * (cs[i].b + h * (cs[i].c + h * cs[i].d));
        const double d_end = cs[i].b + h * (2.0 * cs[i].c + 3.0 * h * cs[i].d);
        const double m_end = 2.0 * cs[i].c + 6.0 * h * cs[i].d;
        CHECK(std::abs(v_end - cs[i + 1].a) <= 1e-9);
        CHECK(std::abs(d_end - cs[i + 1].b) <= 1e-9);
        CHECK(std::abs(m_end - 2.0 * cs[i + 1].c) <= 1e-9);
    }
}

TEST_CASE("natural boundary: second derivative vanishes at both ends") {
    std::vector<double> t = {0.0, 0.3, 0.5, 0.9, 1.0};
    std::vector<double> y = {1.0, -0.4, 0.8, 0.1, -0.9};
    auto path = fit_control_path(one_channel(t, y));
    const double h = 1e-5;
    const auto& coeffs = path.channel(0).coeffs();
    // One-sided differences of deriv see f''(t0 + h/2), which sits 3*h*|d|
    // away from the boundary value even for an exact natural spline.
    const double d2_start = (path.deriv(t.front() + h)[0] - path.deriv(t.front())[0]) / h;
    const double d2_end = (path.deriv(t.back())[0] - path.deriv(t.back() - h)[0]) / h;
    CHECK(std::abs(d2_start) <= 3.0 * h * std::abs(coeffs.front().d) + 1e-6);
    CHECK(std::abs(d2_end) <= 3.0 * h * std::abs(coeffs.back().d) + 1e-6);
    const auto& cs = coeffs;
    CHECK(std::abs(2.0 * cs.front().c) <= 1e-9);
    const double hl = t.back() - t[t.size() - 2];
    CHECK(std::abs(2.0 * cs.back().c + 6.0 * hl * cs.back().d) <= 1e-9);
}

TEST_CASE("deriv matches central finite differences of eval on 1000 seeded points") {
    Rng rng(41);
    std::vector<double> t = {0.0, 0.18, 0.33, 0.52, 0.74, 1.0};
    std::vector<double> y(6);
    for (auto& v : y) v = rng.normal(0.0, 1.5);
    auto path = fit_control_path(one_channel(t, y));
    const double h = 1e-6;
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(0.01, 0.99);
        const double fd = (path.eval(x + h)[0] - path.eval(x - h)[0]) / (2.0 * h);
        CHECK(std::abs(fd - path.deriv(x)[0]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("monotone 2-knot data yields a monotone path") {
    auto path = fit_control_path(one_channel({0.2, 0.8}, {-1.0, 2.0}));
    double prev = path.eval(0.2)[0];
    for (int i = 1; i <= 50; ++i) {
        const double x = 0.2 + 0.6 * i / 50.0;
        const double v = path.eval(x)[0];
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("time channel is the identity with unit derivative") {
    IrregularSeries s = one_channel({0.0, 0.4, 1.0}, {0.5, -0.2, 0.3});
    auto path = fit_control_path(s);
    CHECK(path.channels() == 2);
    for (double x : {0.0, 0.13, 0.62, 1.0}) {
        CHECK(path.eval(x)[1] == doctest::Approx(x).epsilon(1e-15));
        CHECK(path.deriv(x)[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("out-of-range evaluation extends linearly with boundary slope") {
    auto path = fit_control_path(one_channel({0.2, 0.5, 0.8}, {0.0, 1.0, 0.0}));
    const double slope_l = path.deriv(0.2)[0];
    const double slope_r = path.deriv(0.8)[0];
    CHECK(path.eval(0.1)[0] == doctest::Approx(0.0 + slope_l * (0.1 - 0.2)).epsilon(1e-10));
    CHECK(path.eval(0.95)[0] == doctest::Approx(0.0 + slope_r * (0.95 - 0.8)).epsilon(1e-10));
    CHECK(path.deriv(0.05)[0] == doctest::Approx(slope_l).epsilon(1e-12));
    CHECK(path.deriv(1.1)[0] == doctest::Approx(slope_r).epsilon(1e-12));
}

TEST_CASE("single-observation channel degrades to a constant path") {
    IrregularSeries s;
    s.id = "c";
    s.times = {0.0, 0.5, 1.0};
    s.channels = 2;
    s.values = {3.0, 7.0, 4.0, 0.0, 5.0, 0.0};
    s.mask = {1, 1, 1, 0, 1, 0};
    auto path = fit_control_path(s);
    CHECK(path.eval(0.3)[1] == doctest::Approx(7.0));
    CHECK(path.deriv(0.3)[1] == doctest::Approx(0.0));
}

TEST_CASE("channel with zero observed points raises an unfit-channel error") {
    IrregularSeries s;
    s.id = "bad";
    s.times = {0.0, 1.0};
    s.channels = 2;
    s.values = {1.0, 0.0, 2.0, 0.0};
    s.mask = {1, 0, 1, 0};
    try {
        fit_control_path(s);
        FAIL("expected UnfitChannelError");
    } catch (const UnfitChannelError& e) {
        CHECK(e.channel == 1);
        CHECK(std::string(e.what()).find("channel 1") != std::string::npos);
    }
}

TEST_CASE("NaN time is rejected") {
    auto path = fit_control_path(one_channel({0.0, 1.0}, {0.0, 1.0}));
    CHECK_THROWS_AS(path.eval(std::nan("")), ContractError);
}
