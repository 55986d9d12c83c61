#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topicflow/commands.hpp"
#include "topicflow/synthetic.hpp"

namespace tf = topicflow;
namespace cli = topicflow::cli;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  bool mock = false;
  bool quiet = false;
  std::optional<std::string> slice;
};

tf::RunConfig load(const Options& o) {
  auto overrides = o.overrides;
  if (o.mock) overrides.push_back("provider.mode=mock");
  return tf::load_config(o.config_path, overrides);
}

tf::json run_command(const std::string& name, const Options& o) {
  auto cfg = load(o);
  cli::RunLock lock(cfg.run_dir);
  cli::Session session(cfg);
  cli::check_manifest(session.config(), cli::run_provenance(session));
  if (name == "extract") return cli::cmd_extract(session);
  if (name == "model") return cli::cmd_model(session, o.slice);
  if (name == "evaluate") return cli::cmd_evaluate(session);
  if (name == "outcomes") return cli::cmd_outcomes(session);
  if (name == "report") return cli::cmd_report(session);
  tf::json all;
  all["extract"] = cli::cmd_extract(session);
  all["model"] = cli::cmd_model(session);
  all["evaluate"] = cli::cmd_evaluate(session);
  all["outcomes"] = cli::cmd_outcomes(session);
  all["report"] = cli::cmd_report(session);
  return all;
}

tf::json synth(const std::string& out_dir, std::uint64_t seed, int documents) {
  tf::SyntheticCorpusOptions opt;
  opt.seed = seed;
  opt.n_documents = documents;
  auto corpus = tf::make_synthetic_corpus(opt);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  tf::save_corpus(dir / "corpus.jsonl", corpus.documents);
  tf::save_panel(dir / "panel.csv", corpus.panel);
  return {{"documents", corpus.documents.size()}, {"panel_rows", corpus.panel.size()}, {"out", out_dir}};
}

tf::json icc(const std::vector<std::string>& files) {
  tf::json out = tf::json::array();
  for (const auto& f : files) {
    auto r = tf::icc_2k(tf::load_ratings(f));
    out.push_back({{"file", f}, {"icc", r.icc}, {"ci_low", r.ci_low}, {"ci_high", r.ci_high}, {"targets", r.n}, {"raters", r.k}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leader topic modeling, evaluation and outcome analysis"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "Override a configuration key, e.g. --set pipeline.min_cluster_size=30");
    sub->add_flag("--mock", o.mock, "Use the offline mock providers");
    sub->add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");
  };

  std::string command;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"extract", "Extract leader passages from the corpus"},
      {"model", "Build topic models for each analysis slice"},
      {"evaluate", "Score every model and granularity with the evaluation metrics"},
      {"outcomes", "Relate topic frequencies to firm outcomes"},
      {"report", "Assemble the report from the stored results"},
      {"run", "Run every command in order"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "model") sub->add_option("--slice", o.slice, "Model only this slice, e.g. non_top_behavior");
    sub->callback([&command, n = name] { command = n; });
  }

  std::string synth_out;
  std::uint64_t synth_seed = 0;
  int synth_docs = 800;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus and firm-year panel");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Random seed");
  synth_cmd->add_option("--documents", synth_docs, "Number of documents")->check(CLI::PositiveNumber);
  synth_cmd->callback([&command] { command = "synth"; });

  std::vector<std::string> rating_files;
  auto* icc_cmd = app.add_subcommand("icc", "Agreement between raters, ICC(2,k) with a 95% interval, per ratings CSV");
  icc_cmd->add_option("ratings", rating_files, "CSV files with one column per rater")->required()->check(CLI::ExistingFile);
  icc_cmd->callback([&command] { command = "icc"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  if (o.quiet)
    tf::log::set_sink([](const std::string& level, const std::string& message) {
      if (level != "info") std::cerr << "[" << level << "] " << message << "\n";
    });
  try {
    tf::json summary = command == "synth" ? synth(synth_out, synth_seed, synth_docs)
                       : command == "icc" ? icc(rating_files)
                                          : run_command(command, o);
    std::cout << summary.dump(2) << std::endl;
    return cli::kOk;
  } catch (const std::exception& e) {
    tf::log::write("error", e.what());
    return cli::exit_code_for(e);
  }
}
