#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "stdemand/analysis.hpp"
#include "stdemand/metrics.hpp"
#include "stdemand/synthetic.hpp"

using namespace stdemand;
using oracles::random_tensor;

namespace {

/// Cubes whose per-cell hourly totals are dictated by `series[i][j]`; one
/// segment carries the whole hour.
std::vector<DemandCube> cubes_from_series(const std::vector<std::vector<std::vector<double>>>& series,
                                          int hours) {
    GridSpec g;
    g.cols_i = static_cast<int>(series.size());
    g.rows_j = static_cast<int>(series[0].size());
    std::vector<DemandCube> cubes;
    for (int t = 0; t < hours; ++t) {
        DemandCube c(t, g);
        for (int i = 0; i < g.cols_i; ++i)
            for (int j = 0; j < g.rows_j; ++j)
                c.values.at({0, i, j, 0}) = series[static_cast<size_t>(i)][static_cast<size_t>(j)]
                                                  [static_cast<size_t>(t)];
        cubes.push_back(std::move(c));
    }
    return cubes;
}

}  // namespace

TEST_CASE("metrics on identical truth and prediction are zero") {
    Rng rng(1);
    std::vector<Tensor> t = {random_tensor(Shape{3, 4, 4, 2}, rng, 0.0, 5.0)};
    MetricReport r = metrics(t, t);
    for (int c = 0; c < kChannels; ++c) {
        CHECK(r.rmse[static_cast<size_t>(c)] == 0.0);
        CHECK(r.mae[static_cast<size_t>(c)] == 0.0);
        CHECK(r.n[static_cast<size_t>(c)] == 48);
    }
    CHECK(r.rmse_overall() == 0.0);
}

TEST_CASE("mape excludes zero-truth elements") {
    SECTION("all-zero truth leaves mape missing") {
        std::vector<Tensor> truth = {Tensor(Shape{1, 2}, {0.0, 0.0})};
        std::vector<Tensor> pred = {Tensor(Shape{1, 2}, {1.0, 1.0})};
        MetricReport r = metrics(truth, pred);
        for (int c = 0; c < kChannels; ++c) {
            auto i = static_cast<size_t>(c);
            CHECK(r.rmse[i] == 1.0);
            CHECK(r.mae[i] == 1.0);
            CHECK_FALSE(r.mape[i].has_value());
            CHECK(r.n_mape[i] == 0);
        }
    }
    SECTION("mixed truth averages over positive elements only") {
        std::vector<Tensor> truth = {Tensor(Shape{1, 2}, {2.0, 0.0})};
        std::vector<Tensor> pred = {Tensor(Shape{1, 2}, {1.0, 5.0})};
        MetricReport r = metrics(truth, pred);
        REQUIRE(r.mape[0].has_value());
        CHECK(*r.mape[0] == 0.5);
        CHECK(r.n_mape[0] == 1);
        CHECK_FALSE(r.mape[1].has_value());
    }
}

TEST_CASE("rmse dominates mae and decomposes over concatenation") {
    Rng rng(2);
    std::vector<Tensor> t1, p1, t2, p2;
    for (int k = 0; k < 3; ++k) {
        t1.push_back(random_tensor(Shape{2, 3, 3, 2}, rng, 0.0, 4.0));
        p1.push_back(random_tensor(Shape{2, 3, 3, 2}, rng, 0.0, 4.0));
    }
    for (int k = 0; k < 5; ++k) {
        t2.push_back(random_tensor(Shape{2, 3, 3, 2}, rng, 0.0, 4.0));
        p2.push_back(random_tensor(Shape{2, 3, 3, 2}, rng, 0.0, 4.0));
    }
    MetricReport r1 = metrics(t1, p1), r2 = metrics(t2, p2);
    auto tall = t1, pall = p1;
    tall.insert(tall.end(), t2.begin(), t2.end());
    pall.insert(pall.end(), p2.begin(), p2.end());
    MetricReport rall = metrics(tall, pall);

    for (int c = 0; c < kChannels; ++c) {
        auto i = static_cast<size_t>(c);
        CHECK(rall.rmse[i] >= rall.mae[i]);
        double lhs = rall.rmse[i] * rall.rmse[i] * static_cast<double>(rall.n[i]);
        double rhs = r1.rmse[i] * r1.rmse[i] * static_cast<double>(r1.n[i]) +
                     r2.rmse[i] * r2.rmse[i] * static_cast<double>(r2.n[i]);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
    }
}

TEST_CASE("metrics input validation") {
    std::vector<Tensor> a = {Tensor(Shape{1, 2})};
    CHECK_THROWS(metrics({}, {}));
    CHECK_THROWS(metrics(a, {}));
    CHECK_THROWS(metrics(a, std::vector<Tensor>{Tensor(Shape{2, 2})}));
    CHECK_THROWS(metrics(std::vector<Tensor>{Tensor(Shape{2, 3})},
                         std::vector<Tensor>{Tensor(Shape{2, 3})}));
}

TEST_CASE("pearson coefficient basics") {
    std::vector<double> x = {1.0, 2.0, 3.0};
    CHECK(*pearson(x, x) == Catch::Approx(1.0).margin(1e-12));
    std::vector<double> nx = {-1.0, -2.0, -3.0};
    CHECK(*pearson(x, nx) == Catch::Approx(-1.0).margin(1e-12));

    std::vector<double> y = {1.0, 2.0, 4.0};
    CHECK(*pearson(x, y) == Catch::Approx(0.981980506).margin(1e-6));
    CHECK(*pearson(y, x) == *pearson(x, y));  // symmetry

    // scale invariance with sign flip
    std::vector<double> ax;
    for (double v : x) ax.push_back(-2.5 * v + 7.0);
    CHECK(*pearson(ax, y) == Catch::Approx(-*pearson(x, y)).margin(1e-12));

    CHECK_FALSE(pearson({1.0, 1.0, 1.0}, y).has_value());
    CHECK_THROWS(pearson(x, {1.0, 2.0}));
    CHECK_THROWS(pearson({1.0}, {2.0}));

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> u, v;
        for (int k = 0; k < 12; ++k) {
            u.push_back(rng.uniform(-5.0, 5.0));
            v.push_back(rng.uniform(-5.0, 5.0));
        }
        auto p = pearson(u, v);
        REQUIRE(p);
        CHECK(*p >= -1.0 - 1e-12);
        CHECK(*p <= 1.0 + 1e-12);
    }
}

TEST_CASE("cell_hour_series sums segments") {
    GridSpec g;
    g.cols_i = 2;
    g.rows_j = 2;
    DemandCube c(0, g);
    c.values.at({0, 1, 0, 0}) = 2.0;
    c.values.at({3, 1, 0, 0}) = 5.0;
    c.values.at({5, 1, 0, 1}) = 9.0;
    auto s = cell_hour_series({c}, 1, 0, 0);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == 7.0);
    CHECK(cell_hour_series({c}, 1, 0, 1)[0] == 9.0);
}

TEST_CASE("lag zero against the center itself is one") {
    Rng rng(4);
    std::vector<std::vector<std::vector<double>>> series(
        3, std::vector<std::vector<double>>(3));
    for (auto& col : series)
        for (auto& cell : col)
            for (int t = 0; t < 20; ++t) cell.push_back(rng.uniform(0.0, 10.0));
    auto cubes = cubes_from_series(series, 20);
    CorrelationGrid grid = lagged_correlation(cubes, 1, 1, 0, {0}, {0});
    REQUIRE(grid.at(0, 0).has_value());
    CHECK(*grid.at(0, 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("delayed copy yields perfect lag-1 correlation") {
    Rng rng(5);
    int hours = 24;
    std::vector<std::vector<std::vector<double>>> series(
        4, std::vector<std::vector<double>>(4, std::vector<double>(hours, 0.0)));
    std::vector<double> center;
    for (int t = 0; t < hours; ++t) center.push_back(rng.uniform(0.0, 10.0));
    series[1][1] = center;
    // neighbor (2,2) at t holds the center's value of t+1, so at lag 1 the
    // neighbor's past equals the center's present
    for (int t = 0; t < hours - 1; ++t) series[2][2][static_cast<size_t>(t)] = center[static_cast<size_t>(t) + 1];
    auto cubes = cubes_from_series(series, hours);
    CorrelationGrid grid =
        lagged_correlation(cubes, 1, 1, 0, {1}, {1}, DiagonalMode::SingleDiagonal);
    REQUIRE(grid.at(1, 1).has_value());
    CHECK(*grid.at(1, 1) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("lagged correlation matches a direct loop oracle") {
    Rng rng(6);
    int hours = 18, ci = 2, cj = 2;
    std::vector<std::vector<std::vector<double>>> series(
        5, std::vector<std::vector<double>>(5));
    for (auto& col : series)
        for (auto& cell : col)
            for (int t = 0; t < hours; ++t) cell.push_back(rng.uniform(0.0, 8.0));
    auto cubes = cubes_from_series(series, hours);
    std::vector<int> offsets = {1, 2}, lags = {1, 2, 3};
    CorrelationGrid grid = lagged_correlation(cubes, ci, cj, 0, offsets, lags);

    auto naive_pearson = [](const std::vector<double>& x, const std::vector<double>& y) {
        double mx = 0, my = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(x.size());
        my /= static_cast<double>(x.size());
        double sxy = 0, sxx = 0, syy = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        return sxy / std::sqrt(sxx * syy);
    };
    for (int k : offsets)
        for (int h : lags) {
            double acc = 0;
            int used = 0;
            for (int si : {1, -1})
                for (int sj : {1, -1}) {
                    int ni = ci + si * k, nj = cj + sj * k;
                    if (ni < 0 || ni >= 5 || nj < 0 || nj >= 5) continue;
                    std::vector<double> xc, xn;
                    for (int t = h; t < hours; ++t) {
                        xc.push_back(series[static_cast<size_t>(ci)][static_cast<size_t>(cj)]
                                           [static_cast<size_t>(t)]);
                        xn.push_back(series[static_cast<size_t>(ni)][static_cast<size_t>(nj)]
                                           [static_cast<size_t>(t - h)]);
                    }
                    acc += naive_pearson(xc, xn);
                    ++used;
                }
            REQUIRE(grid.at(k, h).has_value());
            CHECK(std::abs(*grid.at(k, h) - acc / used) <= 1e-12);
        }
}

TEST_CASE("out-of-bounds offsets are missing and short series rejected") {
    Rng rng(7);
    std::vector<std::vector<std::vector<double>>> series(
        4, std::vector<std::vector<double>>(4));
    for (auto& col : series)
        for (auto& cell : col)
            for (int t = 0; t < 10; ++t) cell.push_back(rng.uniform(0.0, 5.0));
    auto cubes = cubes_from_series(series, 10);

    CorrelationGrid grid = lagged_correlation(cubes, 0, 0, 0, {1, 5}, {1});
    CHECK(grid.at(1, 1).has_value());       // (1,1) is the one in-bounds diagonal
    CHECK_FALSE(grid.at(5, 1).has_value());  // all four diagonals out of bounds

    CHECK_THROWS(lagged_correlation(cubes, 0, 0, 0, {1}, {9}));
    CHECK_THROWS(grid.at(3, 1));  // entry never computed

    std::string path = "/tmp/stdemand_test_corr.csv";
    write_correlation_csv(grid, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "k,h,value");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
}

TEST_CASE("heatmap export") {
    GridSpec g;
    g.cols_i = 5;
    g.rows_j = 6;
    DemandCube c(0, g);
    std::string path = "/tmp/stdemand_test_heat.csv";

    SECTION("zero cube gives an all-zero grid") {
        export_heatmap(c.values, 0, path);
        std::ifstream is(path);
        std::string line;
        int rows = 0;
        while (std::getline(is, line)) {
            ++rows;
            for (const std::string& f : split_csv_line(line)) CHECK(std::stod(f) == 0.0);
        }
        CHECK(rows == 5);
    }
    SECTION("single count lands at its row and column, totals conserved") {
        c.values.at({2, 3, 4, 0}) = 1.0;
        c.values.at({4, 3, 4, 0}) = 2.0;
        c.values.at({0, 1, 1, 1}) = 9.0;  // other channel, must not appear
        export_heatmap(c.values, 0, path);
        std::ifstream is(path);
        std::string line;
        double total = 0;
        for (int i = 0; std::getline(is, line); ++i) {
            auto f = split_csv_line(line);
            REQUIRE(f.size() == 6);
            for (int j = 0; j < 6; ++j) {
                double v = std::stod(f[static_cast<size_t>(j)]);
                total += v;
                if (i == 3 && j == 4) CHECK(v == 3.0);
                else CHECK(v == 0.0);
            }
        }
        CHECK(total == 3.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("sweep matches a standalone training run and is deterministic") {
    SyntheticConfig scfg;
    scfg.grid.cols_i = 4;
    scfg.grid.rows_j = 4;
    scfg.days = 4;
    SyntheticData data = generate_synthetic(scfg, 21);
    auto cubes = build_demand(data.trips, scfg.grid, scfg.start_day * 24,
                              (scfg.start_day + scfg.days) * 24);
    DataSplit split = split_by_date(cubes, scfg.start_day + 2, scfg.start_day + 3, 4);

    NetworkConfig ncfg;
    ncfg.lookback = 2;
    ncfg.encoder_layers = 1;
    ncfg.e3d_layers = 1;
    ncfg.decoder_layers = 1;
    ncfg.fusion_layers = 1;
    ncfg.filters = 2;
    ncfg.fc_width = 4;
    ncfg.fusion_width = 8;
    ncfg.grid_i = 4;
    ncfg.grid_j = 4;
    TrainConfig tcfg;
    tcfg.batch_size = 8;
    tcfg.max_epochs = 2;
    tcfg.patience = 1;
    tcfg.seed = 5;

    auto rows = sweep(ncfg, tcfg, "filters", {2}, split, data.weather);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].axis == "filters");
    CHECK(rows[0].value == 2);

    // standalone run with the same seed reproduces the row
    auto train_w = make_windows(split.train, data.weather, ncfg.lookback);
    auto val_w = make_windows(split.val, data.weather, ncfg.lookback);
    auto test_w = make_windows(split.test, data.weather, ncfg.lookback);
    Network net(ncfg, tcfg.seed);
    net.fit_scale(split.train);
    train(net, train_w, val_w, tcfg);
    std::vector<Tensor> truth, pred;
    for (const Sample& s : test_w) {
        truth.push_back(s.target);
        pred.push_back(net.predict(s.seq, s.externals));
    }
    MetricReport rep = metrics(truth, pred);
    CHECK(rows[0].rmse_rent == rep.rmse[0]);
    CHECK(rows[0].rmse_return == rep.rmse[1]);

    // rerunning the sweep bit-reproduces it
    auto rows2 = sweep(ncfg, tcfg, "filters", {2}, split, data.weather);
    CHECK(rows2[0].rmse_rent == rows[0].rmse_rent);
    CHECK(rows2[0].rmse_return == rows[0].rmse_return);

    CHECK_THROWS(sweep(ncfg, tcfg, "dropout", {1}, split, data.weather));

    std::string path = "/tmp/stdemand_test_sweep.csv";
    write_sweep_csv(rows, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "axis,value,rmse_rent,rmse_return");
    std::remove(path.c_str());
}
