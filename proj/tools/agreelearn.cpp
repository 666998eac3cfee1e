// agreelearn: command-line front end. Every command writes its artifacts and a
// manifest.json into --out.

#include <CLI11.hpp>
#include <agreelearn/agreelearn.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using agreelearn::io::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 0;
};

struct InputColumns {
  std::string input;
  std::string label = "label";
  std::string months;
  std::string event;
  std::string tnm;

  agreelearn::CsvColumns csv() const {
    agreelearn::CsvColumns c;
    c.label = label.empty() ? std::nullopt : std::optional<std::string>(label);
    if (!months.empty() || !event.empty()) {
      if (months.empty() || event.empty()) throw agreelearn::PreconditionError("--months and --event go together");
      c.survival = std::make_pair(months, event);
    }
    if (!tnm.empty()) c.tnm = tnm;
    return c;
  }

  agreelearn::Dataset load() const {
    std::ifstream in(input);
    if (!in) throw agreelearn::Error("cannot open input '" + input + "'");
    try {
      return agreelearn::load_csv(in, csv());
    } catch (const agreelearn::Error& e) {
      throw agreelearn::Error(input + ": " + e.what());
    }
  }
};

void add_input_flags(CLI::App* cmd, InputColumns& cols, bool survival = false) {
  if (survival) {
    cols.label.clear();
    cols.months = "months";
    cols.event = "event";
    cols.tnm = "tnm_stage";
  }
  cmd->add_option("--input", cols.input, "dataset CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--label", cols.label, "label column (empty: unlabeled)")->capture_default_str();
  cmd->add_option("--months", cols.months, "survival time column")->capture_default_str();
  cmd->add_option("--event", cols.event, "survival event column (1 = death)")->capture_default_str();
  cmd->add_option("--tnm", cols.tnm, "tnm stage column")->capture_default_str();
}

// Learner kind plus hyperparameter overrides named after the hyperparameters.
struct LearnerFlags {
  std::string kind = "svm_smo";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::map<std::string, double> values;

  agreelearn::LearnerSpec spec(std::uint64_t run_seed) const {
    agreelearn::LearnerSpec s;
    s.kind = agreelearn::parse_learner_kind(kind);
    s.hyperparameters = values;
    s.seed = seed_given ? seed : run_seed;
    s.validate();
    return s;
  }
};

void add_learner_flags(CLI::App* cmd, LearnerFlags& lf, const std::string& default_kind = "svm_smo") {
  lf.kind = default_kind;
  std::vector<std::string> kinds;
  for (auto k : agreelearn::kAllLearnerKinds) kinds.emplace_back(agreelearn::to_string(k));
  cmd->add_option("--learner", lf.kind, "learner kind")->check(CLI::IsMember(kinds))->capture_default_str();
  std::set<std::string> names;
  for (auto k : agreelearn::kAllLearnerKinds)
    for (const auto& [name, v] : agreelearn::default_hyperparameters(k)) names.insert(name);
  for (const auto& name : names)
    cmd->add_option_function<double>(
        "--" + name, [&lf, name](double v) { lf.values[name] = v; }, "learner hyperparameter " + name);
  cmd->add_option_function<std::uint64_t>(
      "--learner-seed", [&lf](std::uint64_t v) {
        lf.seed = v;
        lf.seed_given = true;
      },
      "learner seed (default: --seed)");
}

std::vector<std::string> names_of(std::initializer_list<std::string_view> xs) { return {xs.begin(), xs.end()}; }

void add_cv_flag(CLI::App* cmd, std::string& cv, const std::string& def = "kfold:10") {
  cv = def;
  cmd->add_option("--cv", cv, "kfold:N or loo")
      ->capture_default_str()
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            try {
              agreelearn::CVSpec::parse(s);
              return {};
            } catch (const agreelearn::Error& e) {
              return e.what();
            }
          },
          "CV", "cv"));
}

fs::path prepare_out(const std::string& out) {
  fs::path p(out);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw agreelearn::Error("cannot write '" + path.string() + "'");
  f << text;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_text(path, s.str());
}

// Options of the invoked subcommand, excluding those that cannot change the
// outputs (--out, --threads), in declaration order.
json command_config(const CLI::App* cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const auto name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h" || name == "--out" || name == "--threads") continue;
    const std::string key = name.substr(name.find_first_not_of('-'));
    if (opt->count() > 0) {
      const auto r = opt->results();
      if (opt->get_expected_max() == 0) cfg[key] = true;
      else if (r.size() == 1) cfg[key] = r.front();
      else cfg[key] = r;
    } else if (!opt->get_default_str().empty()) {
      cfg[key] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const CLI::App* cmd, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "agreelearn";
  m["artifact_version"] = agreelearn::io::kArtifactVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = command_config(cmd);
  std::string rerun = "agreelearn " + command + " --seed " + std::to_string(seed);
  for (const auto& [k, v] : m["config"].items()) {
    if (k == "seed") continue;
    const CLI::Option* opt = cmd->get_option_no_throw(k);
    if (opt && !opt->nonpositional()) {
      rerun += " " + v.get<std::string>();
    } else if (v.is_boolean()) {
      rerun += " --" + k;
    } else if (v.is_array()) {
      for (const auto& x : v) rerun += " --" + k + " '" + x.get<std::string>() + "'";
    } else {
      rerun += " --" + k + " '" + v.get<std::string>() + "'";
    }
  }
  m["rerun"] = rerun + " --out <dir>";
  m["outputs"] = outputs;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

agreelearn::CVSpec cv_spec(const std::string& text, std::uint64_t seed) {
  return agreelearn::CVSpec::parse(text, agreelearn::derive_seed(seed, 0xcf));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agreement-voting ensembles with learned and anti-learned members"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  Common common;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "run seed")->required();
    cmd->add_option("--out", common.out, "output directory")->required();
    cmd->add_option("--threads", common.threads, "worker threads (0 = all cores)");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  std::string gen_kind;
  int gen_n = 64, gen_order = 16, gen_per_class = 8;
  double gen_a = 0.1, gen_b = 0.2, gen_frac = 0.5;
  std::optional<double> gen_xor_b;
  gen->add_option("kind", gen_kind, "generator")
      ->required()
      ->check(CLI::IsMember(names_of({"class_symmetric", "hadamard", "polynomial", "merged_xor", "mixture"})));
  gen->add_option("--n", gen_n, "samples (polynomial, merged_xor, mixture)")->capture_default_str();
  gen->add_option("--order", gen_order, "Hadamard order")->capture_default_str();
  gen->add_option("--n-per-class", gen_per_class, "class_symmetric samples per class")->capture_default_str();
  gen->add_option("--a", gen_a, "within-class similarity")->capture_default_str();
  gen->add_option("--b", gen_b, "between-class similarity (class_symmetric)")->capture_default_str();
  gen->add_option("--xor-b", gen_xor_b, "between-class similarity of the merged_xor block");
  gen->add_option("--frac-easy", gen_frac, "mixture: fraction of easy rows")->capture_default_str();
  add_common(gen);

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "rank attributes");
  InputColumns rank_in;
  std::string rank_eval = "svm_rfe";
  agreelearn::RankerSpec rank_spec;
  add_input_flags(rank_cmd, rank_in);
  rank_cmd->add_option("--evaluator", rank_eval)
      ->check(CLI::IsMember(names_of({"svm_rfe", "chi_squared", "info_gain"})))
      ->capture_default_str();
  rank_cmd->add_option("--C", rank_spec.c, "svm_rfe regularization")->capture_default_str();
  rank_cmd->add_option("--n-bins", rank_spec.n_bins, "equal-frequency bins")->capture_default_str();
  add_common(rank_cmd);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "accuracy against attribute count");
  InputColumns sweep_in;
  LearnerFlags sweep_learner;
  std::string sweep_ranking, sweep_end = "best", sweep_cv;
  std::size_t sweep_kmax = 1;
  add_input_flags(sweep, sweep_in);
  sweep->add_option("--ranking", sweep_ranking, "ranking CSV")->required()->check(CLI::ExistingFile);
  sweep->add_option("--end", sweep_end)->check(CLI::IsMember(names_of({"best", "worst"})))->capture_default_str();
  sweep->add_option("--k-max", sweep_kmax)->required();
  add_learner_flags(sweep, sweep_learner);
  add_cv_flag(sweep, sweep_cv, "loo");
  add_common(sweep);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "cross-validated anti-learning verdict");
  InputColumns diag_in;
  LearnerFlags diag_learner;
  std::string diag_cv;
  double diag_alpha = 0.05;
  bool diag_inverted = false;
  add_input_flags(diag, diag_in);
  add_learner_flags(diag, diag_learner);
  add_cv_flag(diag, diag_cv);
  diag->add_option("--alpha", diag_alpha)->capture_default_str();
  diag->add_flag("--inverted", diag_inverted, "score the inverted model");
  add_common(diag);

  // fit / predict
  auto* fit_cmd = app.add_subcommand("fit", "fit a model on all rows");
  InputColumns fit_in;
  LearnerFlags fit_learner;
  std::vector<std::string> fit_attrs;
  std::string fit_orientation = "normal", fit_cv = "kfold:5";
  add_input_flags(fit_cmd, fit_in);
  add_learner_flags(fit_cmd, fit_learner);
  fit_cmd->add_option("--attributes", fit_attrs, "attribute names (default: all)")->delimiter(',');
  fit_cmd->add_option("--orientation", fit_orientation)
      ->check(CLI::IsMember(names_of({"normal", "inverted", "auto"})))
      ->capture_default_str();
  add_cv_flag(fit_cmd, fit_cv, "kfold:5");
  add_common(fit_cmd);

  auto* pred_cmd = app.add_subcommand("predict", "apply a saved model");
  InputColumns pred_in;
  std::string pred_model;
  add_input_flags(pred_cmd, pred_in);
  pred_cmd->add_option("--model", pred_model, "model JSON")->required()->check(CLI::ExistingFile);
  add_common(pred_cmd);

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "agreement-voting subset evaluation");
  InputColumns ens_in;
  std::string ens_members, ens_cv, ens_eval = "svm_rfe";
  bool ens_default = false, ens_ease = false;
  std::vector<std::string> ens_markers;
  add_input_flags(ens, ens_in);
  auto* members_opt = ens->add_option("--members", ens_members, "members config JSON")->check(CLI::ExistingFile);
  auto* roster_opt = ens->add_flag("--default-roster", ens_default, "six-member roster (needs --tnm)");
  members_opt->excludes(roster_opt);
  ens->add_option("--roster-evaluator", ens_eval, "ranking used by --default-roster")
      ->check(CLI::IsMember(names_of({"svm_rfe", "chi_squared", "info_gain"})))
      ->capture_default_str();
  ens->add_flag("--ease", ens_ease, "ease-of-prognosis labels and marker analysis");
  ens->add_option("--markers", ens_markers, "marker attributes for the ease analysis (1 or 3)")->delimiter(',');
  add_cv_flag(ens, ens_cv);
  add_common(ens);

  // survival
  auto* surv = app.add_subcommand("survival", "Kaplan-Meier curves per stage or per stage x prediction");
  InputColumns surv_in;
  std::string surv_pred;
  agreelearn::KMOptions km;
  add_input_flags(surv, surv_in, true);
  surv->add_option("--predictions", surv_pred, "predictions CSV")->check(CLI::ExistingFile);
  surv->add_option("--horizon", km.horizon, "months")->capture_default_str();
  surv->add_flag("--raw-proportions", km.raw_proportions, "surviving fraction instead of product-limit");
  add_common(surv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    agreelearn::set_thread_count(common.threads);
    const fs::path out = prepare_out(common.out);
    const std::uint64_t seed = common.seed;

    if (gen->parsed()) {
      agreelearn::Dataset d;
      if (gen_kind == "class_symmetric") {
        d = agreelearn::gen_class_symmetric(gen_per_class, gen_a, gen_b, seed);
      } else if (gen_kind == "hadamard") {
        d = agreelearn::gen_hadamard(gen_order, seed);
      } else if (gen_kind == "polynomial") {
        d = agreelearn::gen_polynomial(gen_n, seed);
      } else if (gen_kind == "merged_xor") {
        agreelearn::MergedXorOptions o;
        o.within = gen_a;
        o.between = gen_xor_b;
        d = agreelearn::gen_merged_xor(gen_n, seed, o);
      } else {
        d = agreelearn::gen_mixture(gen_n, gen_frac, seed).data;
      }
      write_file(out / "dataset.csv", [&](std::ostream& s) { agreelearn::write_csv(s, d); });
      write_manifest(out, "generate", gen, seed, {"dataset.csv"});
    } else if (rank_cmd->parsed()) {
      const auto d = rank_in.load();
      rank_spec.evaluator = agreelearn::parse_evaluator(rank_eval);
      const auto r = agreelearn::rank(d, rank_spec);
      write_file(out / "ranking.csv", [&](std::ostream& s) { agreelearn::io::write_ranking_csv(s, r, d); });
      write_manifest(out, "rank", rank_cmd, seed, {"ranking.csv"});
    } else if (sweep->parsed()) {
      const auto d = sweep_in.load();
      std::ifstream rin(sweep_ranking);
      const auto ranking = agreelearn::io::read_ranking_csv(rin, d);
      const auto res = agreelearn::sweep_attribute_count(sweep_learner.spec(seed), ranking, d,
                                                         agreelearn::parse_rank_end(sweep_end), sweep_kmax,
                                                         cv_spec(sweep_cv, seed));
      write_file(out / "sweep.csv", [&](std::ostream& s) { agreelearn::io::write_sweep_csv(s, res); });
      write_manifest(out, "sweep", sweep, seed, {"sweep.csv"});
    } else if (diag->parsed()) {
      const auto d = diag_in.load();
      const auto spec = diag_learner.spec(seed);
      const auto cv = cv_spec(diag_cv, seed);
      auto table = agreelearn::cross_validate(spec, d, agreelearn::all_features(d), cv);
      if (diag_inverted)
        for (auto& p : table.prediction) p = 1 - p;
      const auto report = agreelearn::report_from_table(std::move(table), diag_alpha);
      auto j = agreelearn::io::evaluation_report(spec, cv, report);
      j["orientation"] = diag_inverted ? "inverted" : "normal";
      write_text(out / "report.json", j.dump(2) + "\n");
      write_file(out / "predictions.csv",
                 [&](std::ostream& s) { agreelearn::io::write_predictions_csv(s, report.predictions); });
      write_manifest(out, "diagnose", diag, seed, {"report.json", "predictions.csv"});
      std::cout << agreelearn::to_string(report.verdict) << " accuracy=" << agreelearn::format_double(report.cv_accuracy)
                << " p=" << agreelearn::format_double(report.p_value) << '\n';
    } else if (fit_cmd->parsed()) {
      const auto d = fit_in.load();
      std::vector<std::size_t> features;
      if (fit_attrs.empty()) {
        features = agreelearn::all_features(d);
      } else {
        for (const auto& a : fit_attrs) features.push_back(d.attribute_index(a));
      }
      const auto spec = fit_learner.spec(seed);
      agreelearn::TrainedModel model = agreelearn::fit(spec, d, features);
      if (fit_orientation == "inverted") model = model.inverted();
      if (fit_orientation == "auto") model = agreelearn::auto_orient(spec, d, features, cv_spec(fit_cv, seed)).model;
      write_text(out / "model.json", agreelearn::io::to_json(model).dump(2) + "\n");
      write_manifest(out, "fit", fit_cmd, seed, {"model.json"});
    } else if (pred_cmd->parsed()) {
      const auto d = pred_in.load();
      std::ifstream min(pred_model);
      const auto model = agreelearn::io::model_from_json(json::parse(min));
      const auto preds = agreelearn::predict_all(model, d);
      write_file(out / "predictions.csv", [&](std::ostream& s) {
        s << "row,prediction\n";
        for (std::size_t i = 0; i < preds.size(); ++i) s << i << ',' << preds[i] << '\n';
      });
      write_manifest(out, "predict", pred_cmd, seed, {"predictions.csv"});
    } else if (ens->parsed()) {
      const auto d = ens_in.load();
      std::vector<agreelearn::EnsembleMember> members;
      if (ens_default) {
        const auto ranking = agreelearn::rank(d, {agreelearn::parse_evaluator(ens_eval)});
        members = agreelearn::build_default_members(d, ranking);
      } else if (!ens_members.empty()) {
        std::ifstream min(ens_members);
        json cfg;
        try {
          cfg = json::parse(min);
        } catch (const json::exception& e) {
          throw agreelearn::SchemaError(ens_members + ": " + e.what());
        }
        members = agreelearn::io::members_from_json(cfg, d, seed);
      } else {
        throw CLI::RequiredError("--members or --default-roster");
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i].spec.seed == 0) members[i].spec.seed = agreelearn::derive_seed(seed, 0x6d, i);
        members[i].inner_cv.seed = agreelearn::derive_seed(seed, 0x1c, i);
      }
      const auto cv = cv_spec(ens_cv, seed);
      const auto ev = agreelearn::evaluate_subsets(members, d, cv);
      std::vector<std::string> outputs{"members.json", "subsets.csv", "size_summary.csv", "agreement.csv"};
      write_text(out / "members.json", agreelearn::io::members_to_json(members, d).dump(2) + "\n");
      write_file(out / "subsets.csv", [&](std::ostream& s) { agreelearn::io::write_subsets_csv(s, ev.subsets); });
      write_file(out / "size_summary.csv",
                 [&](std::ostream& s) { agreelearn::io::write_size_summary_csv(s, ev.by_size); });
      write_file(out / "agreement.csv", [&](std::ostream& s) { agreelearn::io::write_agreement_csv(s, ev); });
      if (ens_ease || !ens_markers.empty()) {
        const auto ease = agreelearn::ease_from_votes(ev.votes);
        json j;
        j["labels"] = json::array();
        std::size_t n_easy = 0, n_hard = 0;
        for (auto e : ease) {
          j["labels"].push_back(agreelearn::to_string(e));
          n_easy += e == agreelearn::Ease::easy;
          n_hard += e == agreelearn::Ease::hard;
        }
        j["n_easy"] = n_easy;
        j["n_hard"] = n_hard;
        j["markers"] = json::array();
        for (const auto& name : ens_markers) {
          const auto a = agreelearn::ease_marker_analysis(d, ease, d.attribute_index(name));
          j["markers"].push_back({{"marker", a.marker},
                                  {"mean_easy", a.mean_easy},
                                  {"mean_hard", a.mean_hard},
                                  {"threshold", a.threshold},
                                  {"hard_above", a.hard_above},
                                  {"accuracy", a.accuracy}});
        }
        if (ens_markers.size() == 3) {
          const std::array<std::size_t, 3> idx{d.attribute_index(ens_markers[0]), d.attribute_index(ens_markers[1]),
                                               d.attribute_index(ens_markers[2])};
          agreelearn::LearnerSpec mlp{agreelearn::LearnerKind::mlp, {}, agreelearn::derive_seed(seed, 0xea)};
          const auto em = agreelearn::ease_model(d, ease, idx, mlp);
          j["mlp"] = {{"markers", ens_markers}, {"n_samples", em.n_samples}, {"loo_accuracy", em.loo_accuracy}};
        }
        write_text(out / "ease.json", j.dump(2) + "\n");
        outputs.emplace_back("ease.json");
      }
      write_manifest(out, "ensemble", ens, seed, outputs);
    } else if (surv->parsed()) {
      const auto d = surv_in.load();
      if (!d.survival) throw agreelearn::SchemaError("survival needs --months and --event columns");
      if (!d.tnm_stage) throw agreelearn::SchemaError("survival needs a --tnm column");
      write_file(out / "km.csv", [&](std::ostream& s) {
        agreelearn::write_km_csv_header(s);
        if (surv_pred.empty()) {
          for (int stage = 1; stage <= 4; ++stage) {
            std::vector<agreelearn::SurvivalRecord> recs;
            for (std::size_t i = 0; i < d.n_samples(); ++i)
              if ((*d.tnm_stage)[i] == stage) recs.push_back((*d.survival)[i]);
            if (!recs.empty())
              agreelearn::write_km_csv_rows(s, agreelearn::kaplan_meier(recs, km), "TNM " + std::to_string(stage));
          }
        } else {
          std::ifstream pin(surv_pred);
          const auto preds = agreelearn::io::read_predictions_csv(pin);
          for (const auto& g : agreelearn::survival_groups(d, preds, km))
            if (g.curve) agreelearn::write_km_csv_rows(s, *g.curve, g.name);
        }
      });
      write_manifest(out, "survival", surv, seed, {"km.csv"});
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
