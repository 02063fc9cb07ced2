// Copyright 2026 The Formula Scout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// formula-scout: offline pipeline driver and HTTP server.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "formula_scout/config.hpp"
#include "formula_scout/error.hpp"
#include "formula_scout/eval.hpp"
#include "formula_scout/pipeline.hpp"
#include "formula_scout/service.hpp"
#include "formula_scout/synth.hpp"
#include "formula_scout/workbook_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace formula_scout;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        const std::string ext = lower_ext(e.path());
        if (e.is_regular_file() && (ext == ".xlsx" || ext == ".json")) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw std::invalid_argument("no such input: " + in);
    }
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

Models load_bundle(const fs::path& dir) { return Models::from_loaded(load_models(dir)); }

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty theta grid");
  return out;
}

Service* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formula-scout: similar-sheet formula recommendation"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON config (default: $FORMULA_SCOUT_CONFIG)");

  // import
  auto* imp = app.add_subcommand("import", "Convert .xlsx files or dumps into canonical dumps");
  std::vector<std::string> imp_inputs;
  std::string imp_out;
  imp->add_option("inputs", imp_inputs, "Files or directories")->required();
  imp->add_option("--out", imp_out, "Output corpus directory")->required();

  // synth
  auto* syn = app.add_subcommand("synth", "Write the synthetic template-family corpus");
  SynthConfig syn_cfg;
  std::string syn_out;
  bool syn_fixture = false;
  syn->add_option("--out", syn_out, "Output corpus directory")->required();
  syn->add_option("--families", syn_cfg.families)->check(CLI::Range(1, kSynthFamilies));
  syn->add_option("--variants", syn_cfg.variants)->check(CLI::PositiveNumber);
  syn->add_option("--seed", syn_cfg.seed);
  syn->add_option("--formulas-per-sheet", syn_cfg.formulas_per_sheet)->check(CLI::NonNegativeNumber);
  syn->add_flag("--category-fixture", syn_fixture, "Write the category-count pair instead");

  // weaksup
  auto* ws = app.add_subcommand("weaksup", "Generate weakly supervised sheet and region pairs");
  std::string ws_corpus, ws_out;
  std::optional<double> ws_alpha;
  ws->add_option("--corpus", ws_corpus)->required();
  ws->add_option("--alpha", ws_alpha, "Significance level");
  ws->add_option("--out", ws_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the coarse and fine models");
  std::string tr_pairs, tr_out;
  std::optional<std::string> tr_corpus;
  std::optional<int> tr_episodes;
  tr->add_option("--pairs", tr_pairs)->required();
  tr->add_option("--corpus", tr_corpus, "Corpus the pairs refer to (default: recorded by weaksup)");
  tr->add_option("--episodes", tr_episodes);
  tr->add_option("--out", tr_out)->required();

  // index
  auto* ix = app.add_subcommand("index", "Embed a corpus into coarse and fine indexes");
  std::string ix_corpus, ix_models, ix_out;
  ix->add_option("--corpus", ix_corpus)->required();
  ix->add_option("--models", ix_models)->required();
  ix->add_option("--out", ix_out)->required();

  // predict
  auto* pr = app.add_subcommand("predict", "Recommend formulas for one target cell");
  std::string pr_index, pr_models, pr_wb, pr_sheet, pr_cell;
  std::optional<int> pr_k, pr_d, pr_top;
  std::optional<double> pr_theta;
  pr->add_option("--index", pr_index)->required();
  pr->add_option("--models", pr_models)->required();
  pr->add_option("--workbook", pr_wb, "Canonical dump or .xlsx")->required();
  pr->add_option("--sheet", pr_sheet)->required();
  pr->add_option("--cell", pr_cell)->required();
  pr->add_option("--k", pr_k);
  pr->add_option("--d", pr_d);
  pr->add_option("--theta", pr_theta);
  pr->add_option("--top-n", pr_top);

  // eval
  auto* ev = app.add_subcommand("eval", "Split a corpus, index the reference part and score held-out formulas");
  std::string ev_corpus, ev_models, ev_split = "timestamp";
  std::optional<std::string> ev_grid, ev_out;
  std::optional<double> ev_fraction, ev_theta;
  int ev_threads = 0;
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--models", ev_models)->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"random", "timestamp"}));
  ev->add_option("--test-fraction", ev_fraction);
  ev->add_option("--theta", ev_theta);
  ev->add_option("--theta-grid", ev_grid, "Comma-separated thresholds");
  ev->add_option("--threads", ev_threads);
  ev->add_option("--out", ev_out, "Directory for report.json, cases.csv, pr.csv, pr.svg");

  // plot
  auto* pl = app.add_subcommand("plot", "Write PR-curve SVG and CSV from an eval report");
  std::string pl_report, pl_out;
  pl->add_option("--report", pl_report)->required();
  pl->add_option("--out", pl_out, "Output directory")->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Serve the HTTP API");
  std::string sv_index, sv_models, sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--index", sv_index)->required();
  sv->add_option("--models", sv_models)->required();
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const AppConfig cfg = resolve_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);

    if (*imp) {
      std::size_t n = 0;
      for (const auto& p : expand_inputs(imp_inputs)) {
        Workbook wb = lower_ext(p) == ".xlsx"
                          ? import_ooxml_file(p, [&](const std::string& w) { log("warning: " + p.string() + ": " + w); })
                          : load_workbook_file(p);
        save_workbook_file(wb, fs::path(imp_out) / (wb.id + ".json"));
        ++n;
      }
      std::cout << json{{"imported", n}, {"out", imp_out}}.dump() << '\n';
    } else if (*syn) {
      const std::vector<Workbook> corpus =
          syn_fixture ? std::vector<Workbook>{category_count_reference(), category_count_target()} : synth_corpus(syn_cfg);
      for (const auto& wb : corpus) save_workbook_file(wb, fs::path(syn_out) / (wb.id + ".json"));
      std::cout << json{{"workbooks", corpus.size()}, {"out", syn_out}}.dump() << '\n';
    } else if (*ws) {
      AppConfig c = cfg;
      if (ws_alpha) c.alpha = *ws_alpha;
      const auto corpus = load_corpus(ws_corpus);
      const WeakLabels labels = weak_supervise(corpus, c);
      fs::create_directories(ws_out);
      write_sheet_pairs(labels.sheet_pairs, fs::path(ws_out) / "sheet_pairs.jsonl");
      write_region_pairs(labels.region_pairs, fs::path(ws_out) / "region_pairs.jsonl");
      write_file(fs::path(ws_out) / "manifest.json",
                 json{{"corpus", fs::absolute(ws_corpus).string()}, {"alpha", c.alpha}}.dump(2));
      std::cout << json{{"sheet_pairs", labels.sheet_pairs.size()}, {"region_pairs", labels.region_pairs.size()}}.dump()
                << '\n';
    } else if (*tr) {
      AppConfig c = cfg;
      if (tr_episodes) c.model.episodes = *tr_episodes;
      std::string corpus_dir;
      if (tr_corpus) {
        corpus_dir = *tr_corpus;
      } else {
        corpus_dir = json::parse(read_file(fs::path(tr_pairs) / "manifest.json")).at("corpus").get<std::string>();
      }
      const auto corpus = load_corpus(corpus_dir);
      const WeakLabels labels{read_sheet_pairs(fs::path(tr_pairs) / "sheet_pairs.jsonl"),
                              read_region_pairs(fs::path(tr_pairs) / "region_pairs.jsonl")};
      const auto t0 = std::chrono::steady_clock::now();
      TrainedModels trained = train_models(corpus, labels, c, [&](const EpisodeStats& s) {
        if ((s.episode + 1) % 100 == 0) {
          log("episode " + std::to_string(s.episode + 1) + " coarse " + std::to_string(s.coarse_pool_loss) + " fine " +
              std::to_string(s.fine_pool_loss));
        }
      });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_models(*trained.coarse, *trained.fine, c.embedder, tr_out);
      trained.log.write_csv(fs::path(tr_out) / "training_log.csv");
      write_file(fs::path(tr_out) / "config.json", dump_config(c));
      std::cout << json{{"episodes", c.model.episodes},
                        {"episodes_run", trained.log.episodes.size()},
                        {"kept", {{"coarse", trained.log.coarse_kept_episodes}, {"fine", trained.log.fine_kept_episodes}}},
                        {"seconds", secs},
                        {"out", tr_out}}
                       .dump()
                << '\n';
    } else if (*ix) {
      const Models models = load_bundle(ix_models);
      const auto corpus = load_corpus(ix_corpus);
      const IndexedCorpus index = index_corpus(corpus, models);
      save_index(index, ix_out);
      std::cout << json{{"sheets", index.sheet_count()},
                        {"formulas", index.formula_count()},
                        {"skipped_formulas", index.skipped_formulas}}
                       .dump()
                << '\n';
    } else if (*pr) {
      const Models models = load_bundle(pr_models);
      const IndexedCorpus index = load_index(pr_index);
      const Workbook wb = lower_ext(pr_wb) == ".xlsx" ? import_ooxml_file(pr_wb) : load_workbook_file(pr_wb);
      const Sheet* sheet = wb.find_sheet(pr_sheet);
      if (!sheet) throw std::invalid_argument("unknown sheet " + pr_sheet);
      RecommenderConfig rc = cfg.recommender;
      if (pr_k) rc.K = *pr_k;
      if (pr_d) rc.d = *pr_d;
      if (pr_theta) rc.theta = *pr_theta;
      if (pr_top) rc.top_n = *pr_top;
      rc.validate();
      const auto preds = predict(*sheet, parse_a1(pr_cell), wb.id, index, models, rc);
      std::cout << predictions_json(preds) << '\n';
    } else if (*ev) {
      AppConfig c = cfg;
      c.eval.mode = ev_split == "random" ? SplitMode::random : SplitMode::timestamp;
      if (ev_fraction) c.eval.test_fraction = *ev_fraction;
      if (ev_theta) c.recommender.theta = *ev_theta;
      if (ev_grid) c.theta_grid = parse_grid(*ev_grid);
      const Models models = load_bundle(ev_models);
      CorpusSplit split = split_corpus(load_corpus(ev_corpus), c.eval, [](const std::string& w) { log("warning: " + w); });
      const IndexedCorpus index = index_corpus(split.reference, models);
      const Predictor predictor = recommender_predictor(index, models, c.recommender);
      EvalReport report;
      report.split = c.eval;
      report.reference_workbooks = split.reference.size();
      report.test_workbooks = split.test.size();
      report.theta = c.recommender.theta;
      report.result = evaluate(split.cases, split.test, predictor, c.recommender.theta, ev_threads,
                               [](const std::string& w) { log("warning: " + w); });
      report.result.excluded += split.unparseable;
      report.pr = pr_sweep(split.cases, split.test, predictor, c.theta_grid, ev_threads);
      const std::string text = report_json(report);
      if (ev_out) {
        const fs::path out(*ev_out);
        fs::create_directories(out);
        write_file(out / "report.json", text);
        std::ofstream cases(out / "cases.csv");
        write_cases_csv(report.result, cases);
        std::ofstream pr_csv(out / "pr.csv");
        write_pr_csv(report.pr, pr_csv);
        std::ofstream svg(out / "pr.svg");
        write_pr_svg(report.pr, svg);
      }
      std::cout << text << '\n';
    } else if (*pl) {
      const json report = json::parse(read_file(pl_report));
      std::vector<PrPoint> points;
      for (const auto& p : report.at("pr")) {
        PrPoint pt;
        pt.theta = p.at("theta").get<double>();
        pt.n = p.at("n").get<int>();
        pt.n_pred = p.at("n_pred").get<int>();
        pt.n_hit = p.at("n_hit").get<int>();
        pt.scores = {p.at("recall").get<double>(), p.at("precision").get<double>(), p.at("f1").get<double>()};
        points.push_back(pt);
      }
      fs::create_directories(pl_out);
      std::ofstream csv(fs::path(pl_out) / "pr.csv");
      write_pr_csv(points, csv);
      std::ofstream svg(fs::path(pl_out) / "pr.svg");
      write_pr_svg(points, svg);
      std::cout << json{{"points", points.size()}, {"out", pl_out}}.dump() << '\n';
    } else if (*sv) {
      Service service(load_bundle(sv_models), load_index(sv_index), cfg.recommender);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      log("serving on " + sv_host + ":" + std::to_string(sv_port));
      service.listen(sv_host, sv_port);
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    json err{{"error", e.what()}};
    if (const auto* se = dynamic_cast<const SchemaError*>(&e)) err["path"] = se->path();
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) err["position"] = pe->position();
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
