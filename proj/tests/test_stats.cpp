#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <random>

#include "dropkit/error.hpp"
#include "dropkit/simkit.hpp"
#include "dropkit/stats.hpp"
#include "fixtures.hpp"

using namespace dropkit;

TEST_SUITE("stats") {
  TEST_CASE("incomplete gamma agrees with an independent implementation") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> a_dist(0.5, 40.0), x_dist(0.0, 80.0);
    for (int i = 0; i < 500; ++i) {
      const double a = a_dist(rng), x = x_dist(rng);
      const double want = boost::math::gamma_q(a, x);
      CHECK(regularized_gamma_q(a, x) == doctest::Approx(want).epsilon(1e-10));
    }
    CHECK(regularized_gamma_q(2.0, 0.0) == 1.0);
    CHECK_THROWS_AS(regularized_gamma_q(0.0, 1.0), DegenerateInput);
    CHECK_THROWS_AS(regularized_gamma_q(1.0, -1.0), DegenerateInput);
  }

  TEST_CASE("chi-square survival at known points") {
    // Q(1/2, x/2) with one degree of freedom: 3.841459 is the 5% critical value.
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(2.0 * 1.5, 2) == doctest::Approx(std::exp(-1.5)).epsilon(1e-12));
  }

  TEST_CASE("chi-square statistic matches the cell-by-cell oracle") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
      const auto table = fixtures::random_table(rng);
      const auto result = chi_square_table(table);
      CHECK(std::abs(result.statistic - fixtures::chi_square_oracle(table)) <= 1e-9);
      CHECK(result.dof == (table.rows() - 1) * (table.cols() - 1));
      CHECK(result.p_value == doctest::Approx(boost::math::gamma_q(0.5 * result.dof, 0.5 * result.statistic)));
    }
    Eigen::MatrixXd diag(2, 2);
    diag << 20, 0, 0, 20;
    CHECK(chi_square_table(diag).statistic == 40.0);
  }

  TEST_CASE("chi-square is invariant under row and column permutation") {
    std::mt19937_64 rng(21);
    const auto table = fixtures::random_table(rng);
    Eigen::MatrixXd swapped = table;
    swapped.row(0).swap(swapped.row(1));
    swapped.col(0).swap(swapped.col(1));
    CHECK(chi_square_table(swapped).statistic == doctest::Approx(chi_square_table(table).statistic).epsilon(1e-12));
  }

  TEST_CASE("chi-square degenerate inputs") {
    Eigen::MatrixXd one_row(1, 3);
    one_row << 1, 2, 3;
    CHECK_THROWS_AS(chi_square_table(one_row), DegenerateInput);
    Eigen::MatrixXd empty_col(2, 2);
    empty_col << 1, 0, 2, 0;
    CHECK_THROWS_AS(chi_square_table(empty_col), DegenerateInput);
    CHECK_THROWS_AS(chi_square({"a", "a"}, {1, 2}), DegenerateInput);
    const auto r = chi_square({"m", "f", "m", "f"}, {0, 0, 6, 6});
    CHECK(r.row_labels == std::vector<std::string>{"f", "m"});
    CHECK(r.col_values == std::vector<int>{0, 6});
    CHECK(r.statistic == doctest::Approx(0.0));
  }

  TEST_CASE("pearson matches the two-pass oracle and is bounded") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
      std::vector<double> x(30), y(30);
      for (int i = 0; i < 30; ++i) {
        x[i] = 1e3 + g(rng);
        y[i] = -2.0 * x[i] + g(rng);
      }
      const double r = pearson(x, y).r;
      CHECK(std::abs(r - fixtures::pearson_oracle(x, y)) <= 1e-10);
      CHECK(r >= -1.0);
      CHECK(r <= 1.0);
    }
    const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
    CHECK(pearson(x, y).r == doctest::Approx(1.0));
    const std::vector<double> flat{1, 1, 1, 1};
    CHECK_THROWS_AS(pearson(x, flat), DegenerateInput);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{2}), DegenerateInput);
  }

  TEST_CASE("progress buckets") {
    const auto b = ProgressBuckets::standard(6);
    CHECK(b.bucket_of(0) == 0);
    CHECK(b.bucket_of(1) == 1);
    CHECK(b.bucket_of(5) == 1);
    CHECK(b.bucket_of(6) == 2);
  }

  TEST_CASE("correlation report on a simulated cohort") {
    const auto cohort = generate_cohort(CohortSpec::reference());
    const auto report = correlation_report(cohort.log);
    CHECK(report.students == 186);
    CHECK(report.features.size() == 186);
    CHECK(report.completer_mean_msgs_per_chapter > report.dropper_mean_msgs_per_chapter);
    CHECK(report.completer_mean_msg_len > report.dropper_mean_msg_len);
    CHECK(report.pearson.size() == 5);
    for (const auto& row : report.pearson)
      if (row.result) CHECK(row.result->n == report.students - report.traits_missing);
    const auto md = render_report_markdown(report, 6);
    CHECK(md.find("chi") != std::string::npos);
    CHECK(!render_report_json(report).empty());
    for (std::size_t i = 1; i < report.features.size(); ++i)
      CHECK(report.features[i - 1].progress <= report.features[i].progress);
  }

  TEST_CASE("interaction features count student messages only") {
    const auto week = fixtures::intervention_week();
    const auto f = interaction_features(week.log, "back1");
    // One early message of 3 characters and two later ones of 500, all in chapter 1.
    CHECK(f.msgs_per_chapter == doctest::Approx(3.0));
    CHECK(f.avg_msg_len == doctest::Approx(1003.0 / 3.0));
  }
}
