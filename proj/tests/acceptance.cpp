// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dropkit/cli.hpp"
#include "dropkit/config.hpp"
#include "dropkit/cpadp.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/evaluation.hpp"
#include "dropkit/intervention.hpp"
#include "dropkit/mlp.hpp"
#include "dropkit/simkit.hpp"
#include "dropkit/stats.hpp"
#include "dropkit/workspace.hpp"
#include "fixtures.hpp"

using namespace dropkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

// ---------------------------------------------------------------------------

Outcome dataset_combinatorics() {
  Outcome r;
  const auto cohort = generate_cohort(CohortSpec::reference());
  const auto instances = build_dataset(cohort.log);
  r.check(instances.size() == 1201, "1201 instances, got " + std::to_string(instances.size()));

  Eigen::MatrixXi expected(6, 6);
  expected << 186, 22, 8, 3, 7, 2,
              0, 186, 8, 3, 7, 2,
              0, 0, 186, 3, 7, 2,
              0, 0, 0, 186, 7, 2,
              0, 0, 0, 0, 186, 2,
              0, 0, 0, 0, 0, 186;
  const auto counts = pair_count_matrix(instances, 6);
  r.check(counts == expected, "count matrix:\n" + render_count_matrix(counts));

  // Student dropping at chapter 3: 8 pairs with these labels.
  const std::vector<std::tuple<int, int, bool>> table{{1, 1, false}, {1, 3, true}, {2, 2, false}, {2, 3, true},
                                                      {3, 3, true},  {4, 4, true}, {5, 5, true},  {6, 6, true}};
  const auto pairs = enumerate_pairs(3, 6);
  std::vector<std::tuple<int, int, bool>> got;
  for (const auto& p : pairs) got.emplace_back(p.history_start, p.prediction_end, dropout_label(3, p.prediction_end));
  r.check(got == table, "drop-at-3 pairs");

  // The same pattern for every drop-at-3 student actually present in the cohort.
  std::size_t checked = 0;
  for (const auto& t : cohort.truth) {
    if (t.drop_chapter != 3) continue;
    std::vector<std::tuple<int, int, bool>> mine;
    for (const auto& i : instances)
      if (i.student_id == t.student_id) mine.emplace_back(i.history_start, i.prediction_end, i.label);
    r.check(mine == table, "instances of " + t.student_id);
    ++checked;
  }
  r.check(checked == 8, "8 students drop at chapter 3");
  r.detail << "N=" << instances.size() << ", drop-at-3 students checked=" << checked;
  return r;
}

Outcome count_identity() {
  Outcome r;
  std::mt19937_64 rng(2024);
  std::size_t total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CohortSpec spec;
    spec.chapter_count = std::uniform_int_distribution<int>(1, 8)(rng);
    spec.histogram.assign(spec.chapter_count + 1, 0);
    for (auto& h : spec.histogram) h = std::uniform_int_distribution<int>(0, 5)(rng);
    if (std::accumulate(spec.histogram.begin(), spec.histogram.end(), 0) == 0) spec.histogram.back() = 1;
    spec.seed = rng();
    const auto cohort = generate_cohort(spec);
    const int L = spec.chapter_count;

    // Labels are checked after a round trip through the stored dataset format.
    std::istringstream in(emit_dataset({spec.course_id, L, build_dataset(cohort.log)}));
    const auto dataset = parse_dataset(in);

    std::size_t expected = 0;
    std::map<std::string, std::optional<int>> drop;
    for (const auto& t : cohort.truth) {
      expected += std::size_t(L) + (t.drop_chapter ? std::size_t(*t.drop_chapter - 1) : 0);
      drop[t.student_id] = t.drop_chapter;
    }
    r.check(dataset.instances.size() == expected, "N identity in trial " + std::to_string(trial));
    for (const auto& i : dataset.instances)
      if (i.label != (drop.at(i.student_id) && *drop.at(i.student_id) <= i.prediction_end)) {
        r.check(false, "label of " + i.student_id + " in trial " + std::to_string(trial));
        break;
      }
    total += dataset.instances.size();
  }
  r.detail << "100 cohorts, " << total << " instances";
  return r;
}

Outcome statistics_oracles() {
  Outcome r;
  std::mt19937_64 rng(99);
  double worst_chi = 0.0, worst_r = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto table = fixtures::random_table(rng);
    const double got = chi_square_table(table).statistic;
    const double want = fixtures::chi_square_oracle(table);
    worst_chi = std::max(worst_chi, std::abs(got - want));
  }
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(3, 200)(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    const double slope = g(rng), offset = 50.0 * g(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = offset + 10.0 * g(rng);
      y[i] = slope * x[i] + 5.0 * g(rng);
    }
    worst_r = std::max(worst_r, std::abs(pearson(x, y).r - fixtures::pearson_oracle(x, y)));
  }
  Eigen::MatrixXd diag(2, 2);
  diag << 20, 0, 0, 20;
  const double forty = chi_square_table(diag).statistic;
  r.check(worst_chi <= 1e-9, "chi-square agreement");
  r.check(worst_r <= 1e-10, "pearson agreement");
  r.check(forty == 40.0, "[[20,0],[0,20]] = 40");
  r.detail << "max |chi diff|=" << worst_chi << ", max |r diff|=" << worst_r << ", diagonal table=" << forty;
  return r;
}

Outcome mlp_correctness() {
  Outcome r;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int in = std::uniform_int_distribution<int>(1, 6)(rng);
    const int h1 = std::uniform_int_distribution<int>(1, 8)(rng);
    const int h2 = std::uniform_int_distribution<int>(1, 8)(rng);
    auto model = Mlp<double>::glorot({in, h1, h2, 2}, rng());
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& layer : model.layers())
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.3 * g(rng);
    const int n = 7;
    Eigen::MatrixXd x(in, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    Eigen::VectorXi y(n);
    for (int j = 0; j < n; ++j) y(j) = int(rng() % 2);

    std::vector<Mlp<double>::Layer> grad;
    model.loss_and_gradient(x, y, grad);
    const double h = 1e-5;
    auto numeric = [&](double& param) {
      const double keep = param;
      param = keep + h;
      const double up = model.loss(x, y);
      param = keep - h;
      const double down = model.loss(x, y);
      param = keep;
      return (up - down) / (2 * h);
    };
    auto compare = [&](double analytic, double fd) {
      const double scale = std::max(std::abs(analytic), std::abs(fd));
      if (scale < 1e-7) return;  // both effectively zero
      worst = std::max(worst, std::abs(analytic - fd) / scale);
    };
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
      auto& layer = model.layers()[l];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) compare(grad[l].weight.data()[i], numeric(layer.weight.data()[i]));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) compare(grad[l].bias(i), numeric(layer.bias(i)));
    }
  }
  r.check(worst < 1e-4, "gradient relative error");

  double worst_sum = 0.0;
  std::uniform_real_distribution<double> wide(-800.0, 800.0);
  for (int t = 0; t < 200; ++t) {
    Eigen::MatrixXd logits(2, 5);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = t % 2 ? wide(rng) : wide(rng) / 100.0;
    const auto p = softmax_columns(logits);
    for (Eigen::Index j = 0; j < p.cols(); ++j) worst_sum = std::max(worst_sum, std::abs(p.col(j).sum() - 1.0));
  }
  r.check(worst_sum <= 1e-9, "softmax sums");

  // Two classes split by the line x0 + x1 = 0, with a margin.
  Eigen::MatrixXd x(2, 400);
  Eigen::VectorXi y(400);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int j = 0; j < 400;) {
    const double a = u(rng), b = u(rng);
    if (std::abs(a + b) < 0.1) continue;
    x(0, j) = a;
    x(1, j) = b;
    y(j) = a + b > 0 ? kDropoutClass : kRetentionClass;
    ++j;
  }
  TrainConfig config;
  config.seed = 5;
  config.epochs = 200;
  config.hidden = {8};
  const auto first = train_mlp<double>(x, y, config);
  const auto p = first.model.probabilities(x);
  int correct = 0;
  for (int j = 0; j < 400; ++j) correct += (p(kDropoutClass, j) >= 0.5 ? kDropoutClass : kRetentionClass) == y(j);
  const double accuracy = correct / 400.0;
  r.check(accuracy >= 0.99, "separable toy set accuracy");

  const auto second = train_mlp<double>(x, y, config);
  bool identical = true;
  for (std::size_t l = 0; l < first.model.layers().size(); ++l)
    identical = identical && first.model.layers()[l].weight == second.model.layers()[l].weight &&
                first.model.layers()[l].bias == second.model.layers()[l].bias;
  r.check(identical, "same seed, same weights");
  r.detail << "max grad rel err=" << worst << ", max |softmax sum - 1|=" << worst_sum << ", toy accuracy=" << accuracy
           << ", reproducible=" << (identical ? "yes" : "no");
  return r;
}

Outcome finetuned_quality() {
  Outcome r;
  const auto cohort = generate_cohort(CohortSpec::reference());
  const auto instances = build_dataset(cohort.log);
  const auto config = default_config();
  const auto split = split_dataset(instances, config.split_ratio, config.seed_for("split"));
  std::set<std::string> train_ids, test_ids;
  for (const auto& i : split.train) train_ids.insert(i.student_id);
  for (const auto& i : split.test) test_ids.insert(i.student_id);
  std::vector<std::string> overlap;
  std::set_intersection(train_ids.begin(), train_ids.end(), test_ids.begin(), test_ids.end(),
                        std::back_inserter(overlap));
  r.check(overlap.empty(), "student-grouped split");

  FeaturizerConfig features;
  features.chapter_count = 6;
  auto hyper = config.train;
  hyper.seed = config.seed_for("train");
  const auto model = mlp_train(split.train, features, hyper);
  std::vector<bool> predicted;
  for (const auto& o : finetuned_predict_batch(model, split.test)) predicted.push_back(o.label);
  const auto m = metrics(confusion(split.test, predicted));
  r.check(m.accuracy >= 0.90, "accuracy >= 0.90");
  r.check(m.f1 >= 0.85, "F1 >= 0.85");
  r.detail << cohort.truth.size() << " students, test=" << split.test.size() << " instances, accuracy=" << m.accuracy
           << ", F1=" << m.f1;
  return r;
}

Outcome strategy_ordering() {
  Outcome r;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto spec = CohortSpec::reference();
    spec.seed = seed;
    const auto cohort = generate_cohort(spec);
    const auto instances = build_dataset(cohort.log);
    const auto split = split_dataset(instances, 0.2, seed);
    auto client = std::make_shared<DiversitySensitiveClient>(std::make_shared<TruthOracle>(instances),
                                                             DiversityParams::calibrated(split.train), seed);
    CachingTextClient cached(client);
    const std::vector<BenchArm> arms{
        {"random", FewShotStrategy{StrategyKind::random, 4, seed}},
        {"only_false", FewShotStrategy{StrategyKind::only_false, 4, seed}},
        {"special_pair", FewShotStrategy{StrategyKind::special_pair, 2, seed}},
        {"special_plus_casual", FewShotStrategy{StrategyKind::special_plus_casual, 4, seed}},
    };
    const auto rows = compare_prompt_strategies(split.test, split.train, arms, cached, default_prediction_template(), 6);
    r.detail << "seed " << seed << ":";
    for (const auto& row : rows) {
      r.detail << " " << row.name << "=" << row.accuracy;
      r.check(row.failures == 0, "no failed predictions");
    }
    r.detail << "; ";
    r.check(rows[3].accuracy >= rows[2].accuracy && rows[2].accuracy >= rows[1].accuracy &&
                rows[1].accuracy >= rows[0].accuracy,
            "ordering for seed " + std::to_string(seed));
  }
  return r;
}

Outcome intervention_analytics() {
  Outcome r;
  const auto week = fixtures::intervention_week();
  const auto [pre, post] = login_delta(week.log.events(), week.day, week.window);
  r.check(pre == 14 && post == 25, "login delta (14, 25)");

  const auto returning = post_window_students(week.log.events(), week.day, week.window);
  const auto cmp = group_comparison(week.log, returning, week.intervened, week.day);
  r.check(cmp.self_initiated.headcount == 9 && cmp.recalled.headcount == 8, "group sizes 9 and 8");

  auto near = [&](double got, double want, const std::string& what) {
    r.check(std::abs(got - want) <= 0.01, what + " " + std::to_string(got) + " vs " + std::to_string(want));
  };
  near(cmp.self_initiated.offline_days, 7.66, "self offline");
  near(cmp.self_initiated.progress, 2.56, "self chapter");
  near(cmp.self_initiated.message_count, 8.78, "self messages");
  near(cmp.self_initiated.message_length, 106.56, "self length");
  near(cmp.recalled.offline_days, 52.6, "recalled offline");
  near(cmp.recalled.progress, 0.75, "recalled chapter");
  near(cmp.recalled.message_count, 0.25, "recalled messages");
  near(cmp.recalled.message_length, 0.75, "recalled length");

  double worst = 0.0;
  auto agree = [&](const GroupStats& g, const std::vector<std::string>& ids) {
    const auto o = fixtures::group_means_oracle(week.log, ids, week.day);
    for (double d : {g.offline_days - o.offline, g.progress - o.progress, g.message_count - o.messages,
                     g.message_length - o.length})
      worst = std::max(worst, std::abs(d));
  };
  agree(cmp.self_initiated, week.self_initiated);
  agree(cmp.recalled, week.recalled);
  r.check(worst <= 1e-9, "second-pass oracle agreement");
  r.detail << "logins " << pre << " -> " << post << "; self (" << cmp.self_initiated.headcount
           << "): " << cmp.self_initiated.offline_days << ", " << cmp.self_initiated.progress << ", "
           << cmp.self_initiated.message_count << ", " << cmp.self_initiated.message_length << "; recalled ("
           << cmp.recalled.headcount << "): " << cmp.recalled.offline_days << ", " << cmp.recalled.progress << ", "
           << cmp.recalled.message_count << ", " << cmp.recalled.message_length << "; oracle diff=" << worst;
  return r;
}

Outcome email_loop() {
  Outcome r;
  const auto log = fixtures::course_with_fred();
  const auto dir = fixtures::scratch_dir("acceptance-email");
  auto cached = std::make_shared<CachingTextClient>(std::make_shared<EchoEmailClient>(), dir / "cache");

  LengthHeuristicClient judge;
  PredictionContext ctx;
  ctx.client = &judge;
  ctx.chapter_count = log.chapter_count();
  ctx.forced_stage = Stage::zero_shot;
  const AdaptivePredictor predictor(ctx, StagePolicy{});

  FileSink sink(dir / "outbox");
  CampaignConfig config;
  config.analysis_day = 30;
  const auto result = run_campaign(log, predictor, *cached, default_email_template(), sink, config);

  std::multiset<std::string> drafted;
  for (const auto& d : result.drafts) drafted.insert(d.student_id);
  std::set<std::string> flagged;
  for (const auto& s : result.at_risk.flagged) flagged.insert(s.student_id);
  r.check(!flagged.empty() && result.compose_errors.empty(), "students flagged and composed");
  r.check(drafted.size() == flagged.size() && std::set<std::string>(drafted.begin(), drafted.end()) == flagged,
          "one draft per at-risk student");

  const auto fred = std::find_if(result.drafts.begin(), result.drafts.end(),
                                 [](const auto& d) { return d.student_id == "fred"; });
  r.check(fred != result.drafts.end(), "Fred is flagged");
  if (fred != result.drafts.end()) {
    const auto text = fred->subject + "\n" + fred->body;
    r.check(text.find("Hallucination") != std::string::npos, "Fred's draft mentions Hallucination");
    r.check(text.find("General Artificial Intelligence Overview") != std::string::npos,
            "Fred's draft names the prior chapter");
  }

  // draft <-> receipt <-> outbox file
  std::set<std::string> receipts, files;
  bool matched = result.records.size() == result.drafts.size();
  for (std::size_t i = 0; matched && i < result.records.size(); ++i) {
    const auto& rec = result.records[i];
    matched = rec.delivered() && rec.draft_id == result.drafts[i].id() && rec.student_id == result.drafts[i].student_id &&
              *rec.receipt_id == "file:" + rec.draft_id + ".eml";
    if (matched) receipts.insert(*rec.receipt_id);
  }
  for (const auto& e : fs::directory_iterator(dir / "outbox")) files.insert("file:" + e.path().filename().string());
  r.check(matched && receipts.size() == result.drafts.size() && receipts == files, "draft/receipt bijection");

  // A rerun within the cooldown contacts nobody twice; a fresh outbox replays from the cache.
  const auto again = run_campaign(log, predictor, *cached, default_email_template(), sink,
                                  CampaignConfig{31, 14, 0.5, 4, {}, {}}, result.records);
  r.check(again.drafts.empty() && again.skipped_cooldown.size() == flagged.size(), "cooldown");
  FileSink replay_sink(dir / "replay");
  const auto misses = cached->misses();
  const auto replay = run_campaign(log, predictor, *cached, default_email_template(), replay_sink, config);
  r.check(cached->misses() == misses && replay.drafts == result.drafts, "cached replay");

  r.detail << flagged.size() << " at risk, " << result.drafts.size() << " drafts, " << files.size()
           << " outbox files, cache hits=" << cached->hits();
  return r;
}

Outcome end_to_end_determinism() {
  Outcome r;
  const auto root = fixtures::scratch_dir("acceptance-e2e");
  const auto config = root / "config.json";
  std::ofstream(config) << R"({"seed": 42, "policy": {"probability_floor": 0.5}})";

  std::vector<std::map<std::string, std::string>> hashes;
  for (const char* which : {"first", "second"}) {
    const auto ws = (root / which).string();
    const std::vector<std::vector<std::string>> steps{
        {"simulate", "--reference", "-n", "cohort"},
        {"ingest", ws + "/logs/cohort.raw.jsonl", "-n", "cohort"},
        {"analyze", "--log", "cohort"},
        {"build-dataset", "--log", "cohort", "-n", "cohort"},
        {"train", "--dataset", "cohort", "-n", "mlp"},
        {"evaluate", "--dataset", "cohort", "--model", "mlp", "-n", "heldout"},
        {"intervene", "--log", "cohort", "--model", "mlp", "--day", "40", "-n", "wave1"},
        {"measure", "--log", "cohort", "--day", "40", "-n", "week"},
    };
    for (const auto& step : steps) {
      std::vector<std::string> args{"dropkit", "-w", ws, "-c", config.string()};
      args.insert(args.end(), step.begin(), step.end());
      std::ostringstream out, err;
      const int rc = run_cli(args, out, err);
      r.check(rc == 0, std::string(which) + " " + step[0] + " exited " + std::to_string(rc) + ": " + err.str());
      if (rc != 0) return r;
    }
    hashes.push_back(Workspace(ws).artifact_hashes());
  }
  r.check(hashes[0] == hashes[1], "identical artifact hashes");
  for (const auto& [path, sha] : hashes[0])
    if (hashes[1].count(path) && hashes[1].at(path) != sha) r.detail << "differs: " << path << " ";
  r.detail << hashes[0].size() << " artifacts compared";
  return r;
}

}  // namespace

int main() {
  // Endpoint variables would swap the mock clients for real ones.
  for (const char* var : {"DROPKIT_LLM_BASE_URL", "DROPKIT_EMBED_BASE_URL", "DROPKIT_SMTP_HOST"}) unsetenv(var);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dataset combinatorics", dataset_combinatorics},
      {"count identity", count_identity},
      {"statistics oracles", statistics_oracles},
      {"mlp correctness", mlp_correctness},
      {"fine-tuned pipeline quality", finetuned_quality},
      {"prompt-strategy ordering", strategy_ordering},
      {"intervention analytics", intervention_analytics},
      {"email loop", email_loop},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail << "exception: " << e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << " ("
              << std::fixed << std::setprecision(2) << seconds << " s): " << std::defaultfloat
              << outcome.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
