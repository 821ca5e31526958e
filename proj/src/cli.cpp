#include "dropkit/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dropkit/config.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/error.hpp"
#include "dropkit/evaluation.hpp"
#include "dropkit/intervention.hpp"
#include "dropkit/log_core.hpp"
#include "dropkit/mail.hpp"
#include "dropkit/prompt.hpp"
#include "dropkit/simkit.hpp"
#include "dropkit/stats.hpp"
#include "dropkit/util.hpp"
#include "dropkit/workspace.hpp"

namespace dropkit {

namespace fs = std::filesystem;

namespace {

struct Session {
  Config config;
  std::string config_sha256 = "default";
  Workspace workspace;
  std::ostream& out;

  ArtifactManifest manifest(std::string command) const {
    ArtifactManifest m;
    m.command = std::move(command);
    m.inputs["config"] = config_sha256;
    return m;
  }

  std::optional<fs::path> cache(std::string_view which) const {
    if (!config.cache) return std::nullopt;
    return workspace.area("cache") / which;
  }

  PromptTemplate prediction_template() const {
    return config.prediction_template.empty() ? default_prediction_template()
                                              : load_prediction_template(config.prediction_template);
  }

  EmailTemplate email_template() const {
    return config.email_template.empty() ? default_email_template() : load_email_template(config.email_template);
  }

  ClientCallConfig call() const {
    ClientCallConfig c;
    c.params = config.decoding;
    c.retry_budget = config.retry_budget;
    return c;
  }
};

struct LoadedLog {
  CourseLog log;
  std::string sha256;
};

LoadedLog load_log(const Session& s, const std::string& name) {
  const auto text = s.workspace.read("logs", name + ".jsonl");
  std::istringstream in(text);
  return {parse_course_log(in), sha256_hex(text)};
}

struct LoadedDataset {
  Dataset dataset;
  std::string sha256;
};

LoadedDataset load_dataset(const Session& s, const std::string& name) {
  const auto text = s.workspace.read("datasets", name + ".jsonl");
  std::istringstream in(text);
  return {parse_dataset(in), sha256_hex(text)};
}

struct LoadedModel {
  FineTunedModel model;
  std::string sha256;
};

LoadedModel load_model_artifact(const Session& s, const std::string& name) {
  const auto text = s.workspace.read("models", name + ".json");
  return {load_model(text), sha256_hex(text)};
}

std::string histogram_line(const CourseLog& log) {
  std::vector<int> h(static_cast<std::size_t>(log.chapter_count() + 1), 0);
  for (const auto& c : log.completions()) ++h[static_cast<std::size_t>(c.progress)];
  std::string s;
  for (std::size_t k = 0; k < h.size(); ++k) s += (k ? "," : "") + std::to_string(h[k]);
  return s;
}

// ---------------------------------------------------------------------------

void cmd_simulate(Session& s, const std::string& spec_path, bool reference, std::optional<std::uint64_t> seed,
                  const std::string& name) {
  CohortSpec spec;
  bool spec_has_seed = false;
  if (!spec_path.empty()) {
    const auto text = read_file(spec_path);
    spec = parse_cohort_spec(text);
    spec_has_seed = nlohmann::json::parse(text).contains("seed");
  } else if (reference) {
    spec = CohortSpec::reference();
  } else {
    throw Error(ErrorClass::usage, "simulate needs --spec FILE or --reference");
  }
  if (seed) spec.seed = *seed;
  else if (!spec_has_seed) spec.seed = s.config.seed_for("simulate");

  s.workspace.ensure_absent("logs", name + ".raw.jsonl");
  s.workspace.ensure_absent("logs", name + ".truth.jsonl");
  const auto cohort = generate_cohort(spec);
  auto m = s.manifest("simulate");
  m.inputs["spec"] = sha256_hex(cohort_spec_json(spec));
  m.seeds["simulate"] = spec.seed;
  s.workspace.write("logs", name + ".raw.jsonl", emit_course_log(cohort.log), m);
  s.workspace.write("logs", name + ".truth.jsonl", emit_ground_truth(cohort.truth), m);
  s.out << "students\t" << cohort.log.students().size() << "\n"
        << "records\t" << cohort.log.records().size() << "\n"
        << "progress_histogram\t" << histogram_line(cohort.log) << "\n"
        << "log\t" << (s.workspace.path("logs", name + ".raw.jsonl")).string() << "\n";
}

void cmd_ingest(Session& s, const std::string& file, const std::string& name) {
  s.workspace.ensure_absent("logs", name + ".jsonl");
  const auto log = parse_course_log_file(file);
  auto m = s.manifest("ingest");
  m.inputs["source"] = sha256_file(file);
  s.workspace.write("logs", name + ".jsonl", emit_course_log(log), m);
  s.out << "course\t" << log.meta().course_id << "\n"
        << "chapters\t" << log.chapter_count() << "\n"
        << "students\t" << log.students().size() << "\n"
        << "records\t" << log.records().size() << "\n"
        << "logins\t" << log.events().size() << "\n"
        << "progress_histogram\t" << histogram_line(log) << "\n";
}

void cmd_analyze(Session& s, const std::string& log_name, std::string name) {
  if (name.empty()) name = log_name;
  s.workspace.ensure_absent("reports", name + ".correlation.md");
  s.workspace.ensure_absent("reports", name + ".correlation.json");
  const auto loaded = load_log(s, log_name);
  const auto report = correlation_report(loaded.log);
  const auto md = render_report_markdown(report, loaded.log.chapter_count());
  auto m = s.manifest("analyze");
  m.inputs["log"] = loaded.sha256;
  s.workspace.write("reports", name + ".correlation.md", md, m);
  s.workspace.write("reports", name + ".correlation.json", render_report_json(report), m);
  s.out << md;
}

void cmd_build_dataset(Session& s, const std::string& log_name, const std::string& name) {
  s.workspace.ensure_absent("datasets", name + ".jsonl");
  s.workspace.ensure_absent("reports", name + ".pairs.tsv");
  const auto loaded = load_log(s, log_name);
  Dataset d{loaded.log.meta().course_id, loaded.log.chapter_count(), build_dataset(loaded.log)};
  const auto matrix = render_count_matrix(pair_count_matrix(d.instances, d.chapter_count));
  auto m = s.manifest("build-dataset");
  m.inputs["log"] = loaded.sha256;
  s.workspace.write("datasets", name + ".jsonl", emit_dataset(d), m);
  s.workspace.write("reports", name + ".pairs.tsv", matrix, m);
  s.out << "instances\t" << d.instances.size() << "\n" << matrix;
}

void cmd_dataset_stats(Session& s, const std::string& name) {
  const auto loaded = load_dataset(s, name);
  s.out << render_count_matrix(pair_count_matrix(loaded.dataset.instances, loaded.dataset.chapter_count));
}

std::unique_ptr<EmbeddingClient> embedding_for(const Session& s, FeatureMode mode) {
  auto embed = make_embedding_client(s.config.embedding, s.config.seed_for("embedding"));
  if (mode == FeatureMode::embedding && !embed)
    throw ConfigError("embedding features need clients.embedding (mock or http)");
  return embed;
}

void cmd_train(Session& s, const std::string& dataset_name, const std::string& name) {
  s.workspace.ensure_absent("models", name + ".json");
  const auto loaded = load_dataset(s, dataset_name);
  const auto split_seed = s.config.seed_for("split");
  const auto split = split_dataset(loaded.dataset.instances, s.config.split_ratio, split_seed);

  FeaturizerConfig fc;
  fc.mode = s.config.features;
  fc.chapter_count = loaded.dataset.chapter_count;
  auto embed = embedding_for(s, fc.mode);
  if (embed) {
    fc.embed_dim = embed->dimension();
    fc.embed_tag = embed->tag();
  }
  TrainConfig hyper = s.config.train;
  hyper.seed = s.config.seed_for("train");
  auto model = mlp_train(split.train, fc, hyper, fc.mode == FeatureMode::embedding ? embed.get() : nullptr);
  model.dataset_sha256 = loaded.sha256;
  model.split_seed = split_seed;
  model.split_ratio = s.config.split_ratio;

  auto m = s.manifest("train");
  m.inputs["dataset"] = loaded.sha256;
  m.seeds["split"] = split_seed;
  m.seeds["train"] = hyper.seed;
  s.workspace.write("models", name + ".json", save_model(model), m);
  s.out << "train_instances\t" << split.train.size() << "\n"
        << "test_instances\t" << split.test.size() << "\n"
        << "final_loss\t" << std::setprecision(6) << model.train_loss << "\n"
        << "model\t" << model.tag() << "\n";
}

struct PredictArgs {
  std::string dataset;
  std::string model;
  std::string pool;
  std::string stage;
  std::string name;
};

void cmd_predict(Session& s, const PredictArgs& a) {
  s.workspace.ensure_absent("reports", a.name + ".predictions.tsv");
  std::optional<Stage> forced = s.config.forced_stage;
  if (!a.stage.empty()) {
    forced = parse_stage(a.stage);
    if (!forced) throw Error(ErrorClass::usage, "unknown stage '" + a.stage + "'");
  }
  if (forced == Stage::fine_tuned && a.model.empty())
    throw ConfigError("fine_tuned stage requested but no trained model was given (--model)");

  const auto queries = load_dataset(s, a.dataset);
  std::optional<LoadedDataset> pool;
  if (!a.pool.empty()) pool = load_dataset(s, a.pool);
  std::optional<LoadedModel> model;
  if (!a.model.empty()) model = load_model_artifact(s, a.model);

  auto client = make_text_client(s.config.text, &queries.dataset.instances, s.cache("text"));
  auto embed = make_embedding_client(s.config.embedding, s.config.seed_for("embedding"));
  PredictionContext ctx;
  ctx.pool = pool ? &pool->dataset.instances : nullptr;
  ctx.model = model ? &model->model : nullptr;
  ctx.client = client.get();
  ctx.embed = embed.get();
  ctx.prompt = s.prediction_template();
  ctx.strategy = s.config.strategy;
  ctx.strategy.seed = s.config.seed_for("fewshot");
  ctx.call = s.call();
  ctx.chapter_count = queries.dataset.chapter_count;
  ctx.forced_stage = forced;
  if (!ctx.forced_stage && model && !pool) ctx.forced_stage = Stage::fine_tuned;
  AdaptivePredictor predictor(ctx, s.config.policy);

  std::vector<std::string> errors;
  const auto outcomes = predictor.predict_batch(queries.dataset.instances, s.config.in_flight, &errors);
  std::ostringstream tsv;
  tsv << "student_id\tC_h\tC_p\tstage\tp_dropout\tprediction\tretries\tdegraded_from\terror\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& q = queries.dataset.instances[i];
    tsv << q.student_id << '\t' << q.history_start << '\t' << q.prediction_end << '\t';
    if (!outcomes[i]) {
      ++failed;
      tsv << "-\t-\t-\t-\t-\t" << errors[i] << '\n';
      continue;
    }
    const auto& o = *outcomes[i];
    std::string degraded;
    for (auto st : o.degraded_from) degraded += (degraded.empty() ? "" : ",") + std::string(to_string(st));
    tsv << to_string(o.stage) << '\t' << std::fixed << std::setprecision(4) << o.p_dropout << '\t'
        << (o.label ? "dropout" : "retain") << '\t' << o.retries << '\t' << (degraded.empty() ? "-" : degraded)
        << "\t-\n";
  }
  auto m = s.manifest("predict");
  m.inputs["dataset"] = queries.sha256;
  if (pool) m.inputs["pool"] = pool->sha256;
  if (model) m.inputs["model"] = model->sha256;
  m.seeds["fewshot"] = ctx.strategy.seed;
  m.notes["client"] = client->tag();
  m.notes["initial_stage"] = std::string(to_string(predictor.initial_stage()));
  s.workspace.write("reports", a.name + ".predictions.tsv", tsv.str(), m);
  s.out << "initial_stage\t" << to_string(predictor.initial_stage()) << "\n"
        << "predicted\t" << outcomes.size() - failed << "\n"
        << "failed\t" << failed << "\n";
  if (failed == outcomes.size() && !outcomes.empty())
    throw StagesExhausted("every prediction failed; first error: " + errors.front());
}

struct EvalInputs {
  LoadedDataset dataset;
  LoadedModel model;
  DatasetSplit split;
};

EvalInputs eval_inputs(const Session& s, const std::string& dataset_name, const std::string& model_name) {
  auto d = load_dataset(s, dataset_name);
  auto m = load_model_artifact(s, model_name);
  if (!m.model.dataset_sha256.empty() && m.model.dataset_sha256 != d.sha256)
    throw ValidationError("model '" + model_name + "' was trained on a different dataset than '" + dataset_name + "'");
  auto split = split_dataset(d.dataset.instances, m.model.split_ratio, m.model.split_seed);
  return {std::move(d), std::move(m), std::move(split)};
}

std::vector<bool> finetuned_labels(const Session& s, const FineTunedModel& model,
                                   const std::vector<PredictionInstance>& instances) {
  auto embed = make_embedding_client(s.config.embedding, s.config.seed_for("embedding"));
  std::vector<bool> out;
  for (const auto& o : finetuned_predict_batch(model, instances, embed.get())) out.push_back(o.label);
  return out;
}

void cmd_evaluate(Session& s, const std::string& dataset_name, const std::string& model_name, const std::string& name,
                  bool with_llm) {
  s.workspace.ensure_absent("reports", name + ".metrics.tsv");
  s.workspace.ensure_absent("reports", name + ".run.json");
  const auto in = eval_inputs(s, dataset_name, model_name);
  const int L = in.dataset.dataset.chapter_count;

  std::vector<MetricsRow> rows;
  const auto ft = finetuned_labels(s, in.model.model, in.split.test);
  auto counts = confusion(in.split.test, ft);
  rows.push_back({"mlp", "fine_tuned", metrics(counts), counts});

  RunManifest run;
  run.dataset_sha256 = in.dataset.sha256;
  run.model_tag = in.model.model.tag();
  run.seeds["split"] = in.model.model.split_seed;
  run.seeds["train"] = in.model.model.hyper.seed;

  if (with_llm) {
    auto client = make_text_client(s.config.text, &in.dataset.dataset.instances, s.cache("text"));
    run.client_tags.push_back(client->tag());
    FewShotStrategy strategy = s.config.strategy;
    strategy.seed = s.config.seed_for("fewshot");
    run.seeds["fewshot"] = strategy.seed;
    const auto tmpl = s.prediction_template();
    const std::vector<BenchArm> arms{{"zero_shot", std::nullopt}, {"few_shot", strategy}};
    const auto bench = compare_prompt_strategies(in.split.test, in.split.train, arms, *client, tmpl, L, s.call());
    for (const auto& b : bench) rows.push_back({client->tag(), b.name, metrics(b.counts), b.counts});
  }
  auto m = s.manifest("evaluate");
  m.inputs["dataset"] = in.dataset.sha256;
  m.inputs["model"] = in.model.sha256;
  const auto tsv = render_metrics_tsv(rows);
  s.workspace.write("reports", name + ".metrics.tsv", tsv, m);
  s.workspace.write("reports", name + ".run.json", run.to_json(), m);
  s.out << tsv << "run_id\t" << run.id() << "\n";
}

void cmd_heatmap(Session& s, const std::string& dataset_name, const std::string& model_name, const std::string& name) {
  s.workspace.ensure_absent("reports", name + ".heatmap.tsv");
  const auto in = eval_inputs(s, dataset_name, model_name);
  const auto ft = finetuned_labels(s, in.model.model, in.split.test);
  const auto text = render_heatmap(pair_accuracy_matrix(in.split.test, ft, in.dataset.dataset.chapter_count));
  auto m = s.manifest("evaluate heatmap");
  m.inputs["dataset"] = in.dataset.sha256;
  m.inputs["model"] = in.model.sha256;
  s.workspace.write("reports", name + ".heatmap.tsv", text, m);
  s.out << text;
}

void cmd_prompt_bench(Session& s, const std::string& dataset_name, const std::string& name,
                      const std::vector<std::string>& strategies, int k) {
  s.workspace.ensure_absent("reports", name + ".bench.tsv");
  const auto d = load_dataset(s, dataset_name);
  const auto split_seed = s.config.seed_for("split");
  const auto split = split_dataset(d.dataset.instances, s.config.split_ratio, split_seed);
  const auto fewshot_seed = s.config.seed_for("fewshot");
  std::vector<BenchArm> arms;
  for (const auto& name_s : strategies) {
    if (name_s == "zero_shot") {
      arms.push_back({name_s, std::nullopt});
      continue;
    }
    auto kind = parse_strategy_kind(name_s);
    if (!kind) throw Error(ErrorClass::usage, "unknown strategy '" + name_s + "'");
    const int arm_k = *kind == StrategyKind::special_pair ? 2 : k;
    arms.push_back({name_s, FewShotStrategy{*kind, arm_k, fewshot_seed}});
  }
  // The labeled pool is the training side; the mock oracle (if any) sees every label.
  auto client = make_text_client(s.config.text, &d.dataset.instances, s.cache("text"));
  const auto rows = compare_prompt_strategies(split.test, split.train, arms, *client, s.prediction_template(),
                                              d.dataset.chapter_count, s.call());
  const auto tsv = render_bench_tsv(rows);
  auto m = s.manifest("evaluate prompt-bench");
  m.inputs["dataset"] = d.sha256;
  m.seeds["split"] = split_seed;
  m.seeds["fewshot"] = fewshot_seed;
  m.notes["client"] = client->tag();
  s.workspace.write("reports", name + ".bench.tsv", tsv, m);
  s.out << tsv;
}

std::vector<InterventionRecord> prior_records(const Session& s, int analysis_day) {
  std::vector<InterventionRecord> all;
  for (const auto& entry : fs::directory_iterator(s.workspace.area("campaigns"))) {
    const auto manifest = entry.path() / "campaign.json";
    if (!entry.is_directory() || !fs::exists(manifest)) continue;
    const auto text = read_file(manifest.string());
    if (nlohmann::json::parse(text).value("analysis_day", -1) == analysis_day)
      throw Error(ErrorClass::cant_create, "a campaign for day " + std::to_string(analysis_day) + " already exists (" +
                                               entry.path().filename().string() + ")");
    for (auto& r : parse_campaign_records(text)) all.push_back(std::move(r));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sent_day, a.student_id) < std::tie(b.sent_day, b.student_id);
  });
  return all;
}

struct InterveneArgs {
  std::string log;
  std::string model;
  std::string pool;
  int day = 0;
  std::string name;
};

void cmd_intervene(Session& s, const InterveneArgs& a) {
  validate_artifact_name(a.name);
  if (fs::exists(s.workspace.area("campaigns") / a.name))
    throw Error(ErrorClass::cant_create, "campaign '" + a.name + "' already exists");
  if (a.day < 1) throw Error(ErrorClass::usage, "--day must be >= 1");
  const auto prior = prior_records(s, a.day);
  const auto loaded = load_log(s, a.log);
  std::optional<LoadedModel> model;
  if (!a.model.empty()) model = load_model_artifact(s, a.model);
  std::optional<LoadedDataset> pool;
  if (!a.pool.empty()) pool = load_dataset(s, a.pool);

  auto text_client = make_text_client(s.config.text, pool ? &pool->dataset.instances : nullptr, s.cache("text"));
  auto email_client = make_text_client(s.config.email, nullptr, s.cache("email"));
  auto embed = make_embedding_client(s.config.embedding, s.config.seed_for("embedding"));

  PredictionContext ctx;
  ctx.pool = pool ? &pool->dataset.instances : nullptr;
  ctx.model = model ? &model->model : nullptr;
  ctx.client = text_client.get();
  ctx.embed = embed.get();
  ctx.prompt = s.prediction_template();
  ctx.strategy = s.config.strategy;
  ctx.strategy.seed = s.config.seed_for("fewshot");
  ctx.call = s.call();
  ctx.chapter_count = loaded.log.chapter_count();
  ctx.forced_stage = s.config.forced_stage;
  // A trained model without a labeled pool still means enough labels were seen to train it.
  if (!ctx.forced_stage && model && !pool) ctx.forced_stage = Stage::fine_tuned;
  AdaptivePredictor predictor(ctx, s.config.policy);

  std::unique_ptr<MailSink> sink;
  const auto campaign_dir = s.workspace.area("campaigns") / a.name;
  if (s.config.mail_sink == "smtp") sink = std::make_unique<SmtpSink>(s.config.smtp);
  else sink = std::make_unique<FileSink>(campaign_dir / "outbox");

  CampaignConfig cc;
  cc.analysis_day = a.day;
  cc.cooldown_days = s.config.cooldown_days;
  cc.probability_floor = s.config.probability_floor;
  cc.in_flight = s.config.in_flight;
  cc.call = s.call();
  if (!s.config.smtp.from.empty()) cc.delivery.from = s.config.smtp.from;
  const auto result = run_campaign(loaded.log, predictor, *email_client, s.email_template(), *sink, cc, prior);

  auto m = s.manifest("intervene");
  m.inputs["log"] = loaded.sha256;
  if (model) m.inputs["model"] = model->sha256;
  if (pool) m.inputs["pool"] = pool->sha256;
  m.seeds["fewshot"] = ctx.strategy.seed;
  m.notes["email_client"] = email_client->tag();
  m.notes["sink"] = sink->channel();
  s.workspace.write("campaigns", a.name + "/campaign.json", campaign_manifest_json(result, a.day), m);

  std::size_t delivered = 0;
  for (const auto& r : result.records) delivered += r.delivered() ? 1 : 0;
  s.out << "at_risk\t" << result.at_risk.flagged.size() << "\n"
        << "skipped_cooldown\t" << result.skipped_cooldown.size() << "\n"
        << "drafts\t" << result.drafts.size() << "\n"
        << "delivered\t" << delivered << "\n"
        << "delivery_failures\t" << result.records.size() - delivered << "\n"
        << "prediction_errors\t" << result.at_risk.errors.size() << "\n"
        << "compose_errors\t" << result.compose_errors.size() << "\n";
}

void cmd_measure(Session& s, const std::string& log_name, int day, int window,
                 std::vector<std::string> campaigns, const std::string& name) {
  s.workspace.ensure_absent("reports", name + ".measure.tsv");
  const auto loaded = load_log(s, log_name);
  if (campaigns.empty())
    for (const auto& entry : fs::directory_iterator(s.workspace.area("campaigns")))
      if (fs::exists(entry.path() / "campaign.json")) campaigns.push_back(entry.path().filename().string());
  std::sort(campaigns.begin(), campaigns.end());
  std::set<std::string> intervened;
  auto m = s.manifest("measure");
  m.inputs["log"] = loaded.sha256;
  for (const auto& c : campaigns) {
    const auto text = s.workspace.read("campaigns", c + "/campaign.json");
    m.inputs["campaign:" + c] = sha256_hex(text);
    for (const auto& r : parse_campaign_records(text))
      if (r.delivered() && r.sent_day <= day) intervened.insert(r.student_id);
  }
  const auto [pre, post] = login_delta(loaded.log.events(), day, window);
  const auto returning = post_window_students(loaded.log.events(), day, window);
  const auto comparison = group_comparison(loaded.log, returning, intervened, day);
  std::ostringstream tsv;
  tsv << "intervention_day\t" << day << "\nwindow_days\t" << window << "\npre_logins\t" << pre << "\npost_logins\t"
      << post << "\nintervened_students\t" << intervened.size() << "\nreturning_students\t" << returning.size()
      << "\n\n"
      << render_comparison_tsv(comparison);
  s.workspace.write("reports", name + ".measure.tsv", tsv.str(), m);
  s.out << tsv.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dropkit: dropout prediction and recall-email pipeline for conversational online courses"};
  app.name(args.empty() ? "dropkit" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  std::string workspace_dir, config_path;
  app.add_option("-w,--workspace", workspace_dir, "Workspace root (overrides paths.workspace)");
  app.add_option("-c,--config", config_path, "Config file (JSON)");

  std::string name, log_name, dataset_name, model_name, pool_name, spec_path, stage, file;
  bool reference = false, with_llm = false;
  std::optional<std::uint64_t> sim_seed;
  int day = 0, window = 3, k = 4;
  std::vector<std::string> campaigns;
  std::vector<std::string> strategies{"zero_shot", "random", "only_false", "special_pair", "special_plus_casual"};

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort log and its ground truth");
  simulate->add_option("--spec", spec_path, "Cohort spec (JSON)")->check(CLI::ExistingFile);
  simulate->add_flag("--reference", reference, "Use the built-in 186-student, 6-chapter reference cohort");
  simulate->add_option("--seed", sim_seed, "Generator seed (default: derived from the config seed)");
  simulate->add_option("-n,--name", name, "Artifact name (default: cohort)");

  auto* ingest = app.add_subcommand("ingest", "Validate a course log and store it in the workspace");
  ingest->add_option("file", file, "Course log (JSON lines)")->required()->check(CLI::ExistingFile);
  ingest->add_option("-n,--name", name, "Artifact name")->required();

  auto* analyze = app.add_subcommand("analyze", "Correlation report: chi-square, Pearson, engagement features");
  analyze->add_option("--log", log_name, "Log name")->required();
  analyze->add_option("-n,--name", name, "Report name (default: log name)");

  auto* build = app.add_subcommand("build-dataset", "Build (C_h, C_p) prediction instances from a log");
  build->add_option("--log", log_name, "Log name");
  build->add_option("-n,--name", name, "Dataset name");
  build->require_subcommand(0, 1);
  auto* stats = build->add_subcommand("stats", "Print the (C_h, C_p) instance-count matrix of a dataset");
  stats->add_option("--dataset", dataset_name, "Dataset name")->required();

  auto* train = app.add_subcommand("train", "Split a dataset by student and train the MLP classifier");
  train->add_option("--dataset", dataset_name, "Dataset name")->required();
  train->add_option("-n,--name", name, "Model name")->required();

  auto* predict = app.add_subcommand("predict", "Predict dropout for every instance of a dataset");
  predict->add_option("--dataset", dataset_name, "Query dataset")->required();
  predict->add_option("--model", model_name, "Trained model");
  predict->add_option("--pool", pool_name, "Labeled example pool (dataset name)");
  predict->add_option("--stage", stage, "Force a stage: zero_shot | few_shot | fine_tuned");
  predict->add_option("-n,--name", name, "Report name")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Held-out metrics for a trained model");
  evaluate->add_option("--dataset", dataset_name, "Dataset the model was trained on");
  evaluate->add_option("--model", model_name, "Model name");
  evaluate->add_option("-n,--name", name, "Report name");
  evaluate->add_flag("--llm", with_llm, "Also score zero-shot and few-shot prompting with the text client");
  evaluate->require_subcommand(0, 1);
  auto* heatmap = evaluate->add_subcommand("heatmap", "Per-(C_h, C_p) accuracy grid and per-gap accuracy");
  heatmap->add_option("--dataset", dataset_name, "Dataset name")->required();
  heatmap->add_option("--model", model_name, "Model name")->required();
  heatmap->add_option("-n,--name", name, "Report name")->required();
  auto* bench = evaluate->add_subcommand("prompt-bench", "Compare few-shot example-selection strategies");
  bench->add_option("--dataset", dataset_name, "Dataset name")->required();
  bench->add_option("-n,--name", name, "Report name")->required();
  bench->add_option("--strategies", strategies, "Arms to compare")->delimiter(',');
  bench->add_option("-k", k, "Examples per prompt (special_pair always uses 2)")->default_val(4);

  auto* intervene = app.add_subcommand("intervene", "Flag at-risk students, compose and deliver recall emails");
  intervene->add_option("--log", log_name, "Log name")->required();
  intervene->add_option("--model", model_name, "Trained model");
  intervene->add_option("--pool", pool_name, "Labeled example pool (dataset name)");
  intervene->add_option("--day", day, "Analysis day (day index)")->required();
  intervene->add_option("-n,--name", name, "Campaign name")->required();

  auto* measure = app.add_subcommand("measure", "Login delta and self-initiated vs recalled comparison");
  measure->add_option("--log", log_name, "Log name")->required();
  measure->add_option("--day", day, "Intervention day d")->required();
  measure->add_option("--window", window, "Window length w in days")->default_val(3);
  measure->add_option("--campaign", campaigns, "Campaigns whose recipients count as intervened (default: all)");
  measure->add_option("-n,--name", name, "Report name")->required();

  std::vector<std::string> argv_storage(args.begin(), args.end());
  if (argv_storage.empty()) argv_storage.push_back("dropkit");
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : static_cast<int>(ErrorClass::usage);
  }

  try {
    Config config = config_path.empty() ? default_config() : load_config(config_path);
    std::string sha = config_path.empty() ? "default" : sha256_file(config_path);
    if (workspace_dir.empty()) workspace_dir = config.workspace;
    if (workspace_dir.empty()) throw Error(ErrorClass::usage, "no workspace: pass --workspace or set paths.workspace");
    Session s{std::move(config), std::move(sha), Workspace(workspace_dir), out};

    auto need = [](const std::string& v, const char* what) {
      if (v.empty()) throw Error(ErrorClass::usage, std::string("missing ") + what);
    };
    if (simulate->parsed()) cmd_simulate(s, spec_path, reference, sim_seed, name.empty() ? "cohort" : name);
    else if (ingest->parsed()) cmd_ingest(s, file, name);
    else if (analyze->parsed()) cmd_analyze(s, log_name, name);
    else if (stats->parsed()) cmd_dataset_stats(s, dataset_name);
    else if (build->parsed()) {
      need(log_name, "--log");
      need(name, "--name");
      cmd_build_dataset(s, log_name, name);
    } else if (train->parsed()) cmd_train(s, dataset_name, name);
    else if (predict->parsed()) cmd_predict(s, {dataset_name, model_name, pool_name, stage, name});
    else if (heatmap->parsed()) cmd_heatmap(s, dataset_name, model_name, name);
    else if (bench->parsed()) cmd_prompt_bench(s, dataset_name, name, strategies, k);
    else if (evaluate->parsed()) {
      need(dataset_name, "--dataset");
      need(model_name, "--model");
      need(name, "--name");
      cmd_evaluate(s, dataset_name, model_name, name, with_llm);
    } else if (intervene->parsed()) cmd_intervene(s, {log_name, model_name, pool_name, day, name});
    else if (measure->parsed()) cmd_measure(s, log_name, day, window, campaigns, name);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::data);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::io);
  }
}

}  // namespace dropkit
