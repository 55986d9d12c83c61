// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "planted.hpp"
#include "support.hpp"
#include "topicflow/metrics.hpp"
#include "topicflow/outcomes.hpp"
#include "topicflow/pipeline.hpp"

#ifdef TOPICFLOW_CLI_PATH
#include "cli_support.hpp"
#endif

using namespace topicflow;
using testing_support::TempDir;

namespace {

// Collects failed expectations; the criterion passes when none failed.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os << what << ": " << std::setprecision(15) << got << " vs " << want;
    expect(std::abs(got - want) <= tol, os.str());
  }
  bool passed() const { return failed_ == 0; }
  std::string summary(const std::string& on_pass) const {
    if (passed()) return on_pass + " (" + std::to_string(checks_) + " checks)";
    std::string s = std::to_string(failed_) + " of " + std::to_string(checks_) + " checks failed";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  long checks_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
};

struct Verdict {
  bool pass;
  std::string detail;
};

Verdict verdict(const Check& c, const std::string& on_pass) { return {c.passed(), c.summary(on_pass)}; }

ClientOptions quiet_client(const std::filesystem::path& cache = {}) {
  ClientOptions o;
  o.cache_dir = cache;
  o.backoff_base = std::chrono::milliseconds(0);
  return o;
}

PipelineConfig planted_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.min_cluster_size = 30;
  cfg.seed = seed;
  cfg.n_clusters = {2, 3, 4};
  return cfg;
}

// ---------------------------------------------------------------------------

Verdict formula_fidelity() {
  Check c;
  std::vector<Vector> reps(4, Vector::Zero(3));
  reps[0] << 0, 0, 1;
  const double polar[3] = {0.20, 0.25, 0.30};
  for (int i = 1; i < 4; ++i) {
    const double az = 2.0 * M_PI * (i - 1) / 3.0;
    reps[i] << std::sin(polar[i - 1]) * std::cos(az), std::sin(polar[i - 1]) * std::sin(az), std::cos(polar[i - 1]);
  }
  auto topic = [](int id, const std::string& name) {
    Topic t;
    t.topic_id = id;
    t.name = name;
    t.description = "about " + name;
    return t;
  };
  std::vector<Topic> topics{topic(0, "great meetings"), topic(1, "terrible meetings"), topic(2, "great agenda"),
                            topic(3, "weekly agenda")};
  LlmClient llm(std::make_shared<HeuristicLlmProvider>(), quiet_client());
  auto d = integration_distance(topics, reps, llm, 0.5);
  std::set<std::pair<double, double>> covered;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      const double dm = 1.0 - reps[i].dot(reps[j]) / (reps[i].norm() * reps[j].norm());
      const double h = d.heaviside(i, j);
      const double s = h ? d.s_stance(i, j) : 1.0;
      c.near(d.d_meaning(i, j), dm, 1e-12, "d_meaning");
      c.near(d.d_overall(i, j), dm - (1.0 - s) * h, 1e-12, "d_overall");
      covered.insert({h, h ? s : -1.0});
    }
  c.expect(covered.count({1.0, 0.0}) && covered.count({1.0, 0.5}) && covered.count({1.0, 1.0}) && covered.count({0.0, -1.0}),
           "fixture covers H in {0,1} and s in {0, 0.5, 1}");

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 4 + static_cast<int>(rng() % 5);
    Matrix dm = Matrix::Zero(k, k), s = Matrix::Ones(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        dm(i, j) = dm(j, i) = u(rng);
        s(i, j) = s(j, i) = u(rng);
      }
    const double tau = 0.05 + 0.5 * u(rng);
    const double close = tau * (0.01 + 0.99 * u(rng));
    const double s_aligned = 0.999 * u(rng);
    dm(0, 1) = dm(1, 0) = dm(2, 3) = dm(3, 2) = close;
    s(0, 1) = s(1, 0) = s_aligned;
    s(2, 3) = s(3, 2) = s_aligned + (1.0 - s_aligned) * (0.001 + 0.999 * u(rng));
    dm(0, 2) = dm(2, 0) = tau + (1.0 - tau) * (0.001 + 0.999 * u(rng));
    auto r = compose_integration_distance(dm, s, tau);
    c.expect(r.d_overall(0, 1) < r.d_overall(2, 3), "aligned-close below misaligned-close");
    c.expect(r.d_overall(2, 3) < r.d_overall(0, 2), "misaligned-close below far");
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j) {
          const double h = dm(i, j) <= tau ? 1.0 : 0.0;
          c.near(r.d_overall(i, j), dm(i, j) - (1.0 - s(i, j)) * h, 1e-12, "random fixture d_overall");
        }
  }
  return verdict(c, "4-topic fixture exact, ordering holds on 1000 random fixtures");
}

Verdict oracle_equivalence() {
  using testing_support::gaussian;
  Check c;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int m = 2 + static_cast<int>(seed % 7);
    Matrix C = gaussian(m, 4, seed * 2 + 1);
    Vector centroid = gaussian(1, 4, seed * 2 + 2).row(0);
    for (double l : {0.0, 0.3, 0.7, 1.0})
      for (int k = 1; k <= m; ++k)
        c.expect(mmr_select(C, centroid, l, k) == oracles::mmr(C, centroid, l, k), "MMR selection");
  }
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int k = 2 + static_cast<int>(seed % 7);
    Matrix D = testing_support::random_metric(k, seed);
    auto got = ward_linkage(D), want = oracles::ward(D);
    for (std::size_t s = 0; s < got.size(); ++s) {
      c.expect(std::minmax(got[s].left, got[s].right) == std::minmax(want[s].left, want[s].right), "Ward merge pair");
      c.near(got[s].distance, want[s].distance, 1e-10, "Ward merge height");
    }
  }
  std::mt19937_64 rng(7);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> docs(10 + trial % 40);
    for (auto& d : docs)
      for (const auto& w : vocab)
        if (rng() % 3 == 0) d.push_back(w);
    docs.push_back(vocab);
    std::vector<std::string> topic;
    for (const auto& w : vocab)
      if (rng() % 2) topic.push_back(w);
    if (topic.size() < 2) continue;
    double want = 0;
    int pairs = 0;
    for (std::size_t i = 0; i < topic.size(); ++i)
      for (std::size_t j = i + 1; j < topic.size(); ++j, ++pairs) want += oracles::npmi(docs, topic[i], topic[j]);
    c.near(npmi_coherence({topic}, docs).per_topic[0], want / pairs, 1e-12, "NPMI");
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Matrix X = gaussian(20 + static_cast<int>(seed % 31), 10, seed);
    X.col(2) *= 3.0;
    X.col(5) += 0.5 * X.col(2);
    auto want = oracles::covariance_spectrum(X);
    PcaOptions opt;
    opt.variance_target = 1.0;
    opt.max_dim = std::nullopt;
    opt.chunk_size = 7;
    auto m = fit_pca(X, opt);
    for (int i = 0; i < m.dim(); ++i) c.near(m.explained_variance_ratio(i), want(i), 1e-8, "PCA spectrum");
  }
  for (std::uint64_t s = 0; s < 50; ++s) {
    Vector f = testing_support::uniform(200, 1, s).col(0);
    Vector ctl = gaussian(200, 1, 50 + s).col(0);
    Vector y = 0.7 * f - 0.2 * ctl + gaussian(200, 1, 90 + s).col(0);
    Matrix X(200, 3);
    X << Vector::Ones(200), f, ctl;
    Vector b = oracles::ols(X, y);
    const double sigma2 = (y - X * b).squaredNorm() / 197.0;
    auto r = per_topic_ols(f, ctl, y);
    c.near(r.beta, b(1), 1e-8, "OLS beta");
    c.near(r.se, std::sqrt(sigma2 * (X.transpose() * X).inverse()(1, 1)), 1e-8, "OLS SE");
  }
  for (std::uint64_t s = 0; s < 100; ++s) {
    Matrix y = testing_support::uniform(5 + static_cast<int>(s % 50), 2, s, 0, 10);
    c.near(icc_2_2(y).icc, oracles::icc_2k(y), 1e-10, "ICC(2,2)");
  }
  return verdict(c, "MMR, Ward, NPMI, PCA, OLS and ICC agree with their oracles");
}

Verdict pipeline_recovery() {
  Check c;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto corpus = testing_support::make_planted_corpus(seed);
    TempDir dir;
    LlmClient llm(std::make_shared<HeuristicLlmProvider>(), quiet_client());
    MockEmbeddingProvider embedder(64);
    PipelineContext ctx{llm, embedder, nullptr, planted_config(seed)};
    auto r = run_slice(corpus.slice, ctx, dir / "model");
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    c.expect(r.split.topics.size() == 4, tag + std::to_string(r.split.topics.size()) + " topics after splitting");
    auto [worst, cells] = planted::purity(r.split, corpus.cell);
    c.expect(worst >= 0.95, tag + "purity " + std::to_string(worst));
    c.expect(cells == std::set<int>{0, 1, 2, 3}, tag + "topics cover the four cells");

    const auto& two = r.integrated.at(2);
    std::set<int> themes;
    for (const auto& t : two.topics) {
      std::set<int> t_themes;
      for (const auto& m : t.members) t_themes.insert(corpus.cell.at(m) / 2);
      c.expect(t_themes.size() == 1, tag + "an integrated topic mixes themes");
      themes.insert(*t_themes.begin());
    }
    c.expect(themes.size() == 2, tag + "integration at 2 keeps both themes apart");

    SliceWorkspace ws(corpus.slice, ctx);
    auto halves = planted::halve(r.split);
    int checked = 0;
    for (double tau_q : {0.01, 0.3}) {
      auto qctx = ctx;
      qctx.cfg.tau_quantile = tau_q;
      IntegrationTrace trace;
      integrate_topics(halves, 2, ws, qctx, &trace);
      auto order = planted::opposing_merges_come_last(halves, trace, corpus.cell);
      c.expect(order.violations.empty(), tag + "opposing pair merged early at " +
                                             (order.violations.empty() ? "" : order.violations.front()));
      checked += order.aligned_pairs_checked;
    }
    c.expect(checked > 0, tag + "ordering check saw aligned pairs within the threshold");
  }
  return verdict(c, "4 pure topics, themes merge at 2, opposing pairs merge after aligned ones (3 seeds)");
}

Verdict metric_scale(const std::function<std::optional<std::filesystem::path>()>& cli_reports) {
  Check c;
  auto corpus = testing_support::make_planted_corpus(1);
  TempDir dir;
  LlmClient llm(std::make_shared<HeuristicLlmProvider>(), quiet_client());
  MockEmbeddingProvider embedder(64);
  PipelineContext ctx{llm, embedder, nullptr, planted_config(1)};
  auto r = run_slice(corpus.slice, ctx, dir / "model");
  SliceWorkspace ws(corpus.slice, ctx);
  std::vector<std::string> texts;
  for (const auto& p : corpus.slice.passages) texts.push_back(p.text);
  const std::set<std::string> judge{"topic_label_alignment", "semantic_topic_diversity", "specificity",
                                    "polarity_stance_consistency"};
  for (const auto* state : {&r.split, &r.integrated.at(2), &r.integrated.at(3)}) {
    std::vector<EvalTopic> topics;
    for (const auto& t : state->topics) {
      EvalTopic e{std::to_string(t.topic_id), t.name, t.description, t.top_words, {}};
      for (const auto& id : t.members) e.member_texts.push_back(ws.passage(id).text);
      topics.push_back(std::move(e));
    }
    for (const auto& rep : evaluate_topics(llm, topics, texts)) {
      if (!judge.count(rep.metric_id)) continue;
      c.expect(rep.aggregate >= 0.0 && rep.aggregate <= 1.0, rep.metric_id + " = " + std::to_string(rep.aggregate));
      for (const auto& [id, v] : rep.items) c.expect(v >= 0.0 && v <= 1.0, rep.metric_id + " item " + id + " out of range");
    }
    auto sd = semantic_topic_diversity(llm, topics);
    const bool no_edges = std::all_of(sd.raw_scores.begin(), sd.raw_scores.end(), [](const auto& e) { return std::get<2>(e) < 9; });
    if (no_edges) c.near(sd.value, 1.0, 0.0, "semantic diversity without similar pairs");
  }
  for (int n = 1; n <= 12; ++n) c.near(semantic_diversity_from_edges(n, {}).value, 1.0, 0.0, "diversity of an edgeless graph");

  auto grid = topic_count_grid(100);
  c.expect(grid.tmin == 20 && grid.tmid == 60 && grid.tmax == 100, "granularity grid for 100 topics");

  auto reports = cli_reports();
  c.expect(reports.has_value(), "emitted metrics table available");
  if (reports) {
    std::istringstream in(read_file(*reports / "metrics.csv"));
    std::string header;
    std::getline(in, header);
    std::string want = "type,char,model";
    for (const auto& m : metric_ids())
      for (const char* g : {"Tmin", "Tmid", "Tmax"}) want += "," + m + ":" + g;
    c.expect(header == want, "metrics.csv header " + header);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      c.expect(std::count(line.begin(), line.end(), ',') == std::count(want.begin(), want.end(), ','), "row width");
    }
    c.expect(rows == 2 * 3, "one row per slice and model, got " + std::to_string(rows));
  }
  return verdict(c, "judge metrics in [0,1], edgeless diversity 1.0, Tmin/Tmid/Tmax table layout");
}

Verdict outcome_statistics() {
  using testing_support::make_synthetic_panel;
  Check c;
  int covered = 0;
  for (int s = 0; s < 100; ++s) {
    auto sp = make_synthetic_panel(1000 + s);
    auto design = build_design(aggregate_frequencies(sp.topics, sp.passages, 0), sp.panel);
    c.expect(design.rows.size() == 300, "panel has 300 firm-years");
    auto r = per_topic_ols(design.f.col(0), design.log_employees, design.y.at(OutcomeKind::morale));
    covered += std::abs(r.beta - 2.0) <= 3.0 * r.se;
  }
  c.expect(covered >= 95, "beta within 3 SE in " + std::to_string(covered) + "/100 seeds");

  const double b = 2.0, sigma = 0.5;
  const double share = b * b / 12.0 / (b * b / 12.0 + sigma * sigma);
  double sum = 0.0;
  for (int s = 0; s < 50; ++s) {
    Matrix F = testing_support::uniform(300, 4, 100 + s);
    Matrix C = testing_support::gaussian(300, 1, 200 + s);
    Vector y = b * F.col(0) + C.col(0) + sigma * testing_support::gaussian(300, 1, 300 + s).col(0);
    ElasticNetOptions opt;
    opt.seed = s;
    sum += explanatory_power(F, C, y, opt).partial_r2;
  }
  c.near(sum / 50, share, 0.02, "mean partial R^2 vs analytic share");

  auto planted = make_synthetic_panel(77);
  auto kept = robustness_filter(run_topic_regressions(planted.topics, planted.passages, planted.panel));
  c.expect(std::find(kept.begin(), kept.end(), 0) != kept.end(), "planted topic kept by the robustness filter");
  int passed = 0, candidates = 0;
  for (int s = 0; s < 20; ++s) {
    auto null = make_synthetic_panel(500 + s, 0.0);
    passed += static_cast<int>(robustness_filter(run_topic_regressions(null.topics, null.passages, null.panel)).size());
    candidates += static_cast<int>(null.topics.size());
  }
  const double rate = static_cast<double>(passed) / candidates;
  c.expect(rate <= 3 * 0.05, "null pass rate " + std::to_string(rate));
  std::ostringstream os;
  os << "coverage " << covered << "/100, partial R^2 " << std::setprecision(3) << sum / 50 << " vs " << share
     << ", null pass rate " << rate;
  return verdict(c, os.str());
}

// ---------------------------------------------------------------------------
// Full runs through the command-line tool

#ifdef TOPICFLOW_CLI_PATH
class CliRuns {
 public:
  // Synthesizes a corpus and makes one cold run; later runs reuse its cache.
  std::optional<std::filesystem::path> reference() {
    if (!ready_) {
      ready_ = true;
      auto s = cli_support::run_cli({"synth", "--out", (dir_ / "data").string(), "--documents", "3000", "--seed", "3"});
      if (s.code != 0) return std::nullopt;
      auto r = cli_support::run_cli({"run", "-c", config("reference").string(), "-q"});
      ok_ = r.code == 0;
    }
    if (!ok_) return std::nullopt;
    return dir_ / "reference";
  }
  std::filesystem::path config(const std::string& run) {
    return cli_support::write_config(dir_.path(),
                                     cli_support::config_yaml(dir_ / "data/corpus.jsonl", dir_ / "data/panel.csv", dir_ / run,
                                                              "cache_dir: " + (dir_ / "cache").string() + "\n"),
                                     run + ".yaml");
  }
  std::filesystem::path dir() const { return dir_.path(); }

 private:
  TempDir dir_;
  bool ready_ = false, ok_ = false;
};
#else
class CliRuns {
 public:
  std::optional<std::filesystem::path> reference() { return std::nullopt; }
};
#endif

Verdict determinism_and_resume(CliRuns& runs) {
#ifndef TOPICFLOW_CLI_PATH
  (void)runs;
  return {false, "the command-line tool was not built"};
#else
  using namespace cli_support;
  Check c;
  auto ref = runs.reference();
  if (!ref) return {false, "reference run failed"};
  auto warm = run_cli({"run", "-c", runs.config("warm").string(), "-q"});
  c.expect(warm.code == 0, "warm run exit " + std::to_string(warm.code));
  if (warm.code == 0) {
    const auto s = warm.summary();
    for (const char* step : {"extract", "model", "evaluate", "outcomes"})
      c.expect(s[step]["llm"]["provider_calls"] == 0, std::string("warm cache answers every call in ") + step);
  }
  const auto reference_files = location_free(run_files(*ref));
  auto diff = differing(reference_files, location_free(run_files(runs.dir() / "warm")));
  c.expect(diff.empty(), "warm run differs in " + (diff.empty() ? "" : diff.front()));
  c.expect(reference_files.count("models/non_top_behavior/split.json") && reference_files.count("reports/metrics.csv"),
           "checkpoints and reports present");

  const auto cfg = runs.config("killed");
  c.expect(run_cli({"extract", "-c", cfg.string(), "-q"}).code == 0, "extract before the killed run");
  auto killed = kill_run_when(cfg, runs.dir() / "killed/models/non_top_behavior/reassign.progress.json");
  c.expect(killed.seen && killed.signaled, "run killed during reassignment");
  c.expect(!std::filesystem::exists(runs.dir() / "killed/models/non_top_behavior/reassigned.json"),
           "kill landed before the reassignment checkpoint");
  auto resumed = run_cli({"run", "-c", cfg.string(), "-q"});
  c.expect(resumed.code == 0, "resumed run exit " + std::to_string(resumed.code) + " " + resumed.err);
  diff = differing(reference_files, location_free(run_files(runs.dir() / "killed")));
  c.expect(diff.empty(), "resumed run differs in " + (diff.empty() ? "" : diff.front()));
  const auto index = json::parse(read_file(runs.dir() / "killed/models/index.json"));
  const auto ref_index = json::parse(read_file(*ref / "models/index.json"));
  for (const char* slice : {"non_top_behavior", "top_behavior"})
    c.expect(index[slice]["final_hash"] == ref_index[slice]["final_hash"], std::string("final hash of ") + slice);
  return verdict(c, "warm rerun byte-identical, killed run resumed to hash " +
                        ref_index["non_top_behavior"]["final_hash"].get<std::string>());
#endif
}

Verdict documentation_anchor() {
  Check c;
  const std::filesystem::path root = TOPICFLOW_SOURCE_DIR;
  const auto targets_path = root / "docs/reference_targets.json";
  const auto script = root / "tools/recompute_reference_targets.py";
  c.expect(std::filesystem::exists(targets_path), "reference targets file exists");
  c.expect(std::filesystem::exists(script), "recompute script exists");
  c.expect(std::filesystem::exists(root / "docs/reference_targets.md"), "reference targets notes exist");
  if (!std::filesystem::exists(targets_path)) return verdict(c, "");
  const auto t = json::parse(read_file(targets_path));
  const auto& icc = t["judge_human_agreement"]["metrics"];
  const std::vector<std::tuple<std::string, double, double, double>> want{
      {"polarity_stance_consistency", 0.902, 0.83, 0.94},
      {"topic_label_alignment", 0.895, 0.82, 0.94},
      {"semantic_topic_diversity", 0.824, 0.68, 0.90},
      {"specificity", 0.729, 0.51, 0.85}};
  for (const auto& [metric, v, lo, hi] : want) {
    c.expect(icc.contains(metric), metric + " recorded");
    if (!icc.contains(metric)) continue;
    c.near(icc[metric]["icc"].get<double>(), v, 0.0, metric + " ICC");
    c.near(icc[metric]["ci"][0].get<double>(), lo, 0.0, metric + " CI low");
    c.near(icc[metric]["ci"][1].get<double>(), hi, 0.0, metric + " CI high");
  }
  const auto& power = t["morale_explanatory_power"];
  const std::string proposed = power["proposed"];
  int leads = 0;
  for (const auto& [slice, models] : power["table"].items()) {
    auto best = [](const json& cells) {
      double b = -1;
      for (const auto& v : cells)
        if (!v.is_null()) b = std::max(b, v.get<double>());
      return b;
    };
    const double mine = best(models[proposed]);
    bool lead = true;
    for (const auto& [model, cells] : models.items())
      if (model != proposed && best(cells) > mine) lead = false;
    leads += lead;
  }
  c.expect(power["table"].size() == 6, "six slices recorded");
  c.expect(leads == 5 && power["expected"]["slices_where_proposed_leads"] == 5, "proposed leads in " + std::to_string(leads) + "/6");
  const int rc = std::system(("python3 " + script.string() + " > /dev/null 2>&1").c_str());
  c.expect(rc == 0, "recompute script reproduces the recorded pattern");
  return verdict(c, "ICC 0.902/0.895/0.824/0.729 and the 5/6 morale pattern recorded, script reproduces them");
}

}  // namespace

int main() {
  log::set_sink([](const std::string&, const std::string&) {});
  CliRuns runs;
  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "formula fidelity", 1.0, formula_fidelity},
      {2, "oracle equivalence", 30.0, oracle_equivalence},
      {3, "pipeline recovery", 120.0, pipeline_recovery},
      {4, "metric scale conformance", 0.0, [&] { return metric_scale([&] {
         auto ref = runs.reference();
         return ref ? std::optional(*ref / "reports") : std::nullopt;
       }); }},
      {5, "outcome statistics", 120.0, outcome_statistics},
      {6, "determinism and resumability", 0.0, [&] { return determinism_and_resume(runs); }},
      {7, "documentation anchor", 0.0, documentation_anchor}};

  bool all = true;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = cr.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_s > 0 && secs > cr.limit_s) {
      v.pass = false;
      v.detail += "; took longer than " + std::to_string(static_cast<int>(cr.limit_s)) + " s";
    }
    all &= v.pass;
    std::printf("%s %d %-30s %7.2f s  %s\n", v.pass ? "PASS" : "FAIL", cr.id, cr.name.c_str(), secs, v.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
