#include "ami/harness/run.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "ami/attack/attack.hpp"
#include "ami/defense/defense.hpp"
#include "ami/defense/detector.hpp"
#include "ami/harness/report.hpp"
#include "ami/influence/influence.hpp"
#include "ami/nn/params.hpp"
#include "ami/rl/mappo.hpp"
#include "ami/rng.hpp"

namespace ami::harness {
namespace {

namespace fs = std::filesystem;

void check_flag_keys(const Json& flags, const std::string& subcommand,
                     std::initializer_list<const char*> allowed) {
  if (!flags.is_object()) {
    throw ConfigError(subcommand + " flags must be a JSON object");
  }
  for (const auto& item : flags.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return item.key() == a;
        }) != allowed.end()) {
      continue;
    }
    std::ostringstream msg;
    msg << "unknown flag \"" << item.key() << "\" for " << subcommand
        << "; valid flags: ";
    bool first = true;
    for (const char* a : allowed) {
      if (!first) msg << ", ";
      msg << a;
      first = false;
    }
    throw ConfigError(msg.str());
  }
}

/// Resolves a path flag to an absolute path and writes it back so the
/// manifest records a location that survives directory changes.
fs::path take_path(Json& flags, const std::string& subcommand,
                   const char* key) {
  if (!flags.contains(key)) {
    throw ConfigError(subcommand + " requires the " + key + " flag");
  }
  std::string raw;
  try {
    raw = flags[key].get<std::string>();
  } catch (const Json::exception&) {
    throw ConfigError(subcommand + " flag " + key + " must be a path string");
  }
  const fs::path abs = fs::absolute(raw);
  flags[key] = abs.string();
  return abs;
}

void write_json_file(const fs::path& dir, const std::string& rel,
                     const Json& j) {
  std::ofstream out(dir / rel);
  if (!out) {
    throw ConfigError("cannot write " + (dir / rel).string());
  }
  out << j.dump(2) << "\n";
}

Json env_spec_json(const HarnessConfig& cfg) {
  const env::PosgSpec s = cfg.env.spec();
  Json j;
  j["name"] = cfg.env.name;
  j["n_victims"] = s.n_victims;
  j["n_adversaries"] = s.n_adversaries;
  j["state_dim"] = s.state_dim;
  j["obs_dim"] = s.obs_dim;
  j["discrete"] = s.discrete;
  j["num_actions"] = s.num_actions;
  j["action_dim"] = s.action_dim;
  j["action_low"] = s.action_low;
  j["action_high"] = s.action_high;
  j["max_episode_len"] = s.max_episode_len;
  j["discount"] = s.discount;
  return j;
}

rl::VictimPolicySet load_victims(const HarnessConfig& cfg, const fs::path& path,
                                 bool freeze) {
  if (!fs::exists(path)) {
    throw ConfigError("victim checkpoint not found: " + path.string());
  }
  rl::VictimPolicySet victims(cfg.victim_config(), 0);
  victims.load(path.string());
  if (freeze) victims.freeze();
  return victims;
}

/// Rebuilds the adversary actor stored in an attack checkpoint. The loader
/// runner only supplies the layout, so the metric is normalized to the
/// family default to keep space checks out of the way.
defense::AdversaryHandle load_adversary(const HarnessConfig& cfg,
                                        const env::PosgSpec& spec,
                                        const rl::VictimPolicySet& frozen,
                                        const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("adversary checkpoint not found: " + path.string());
  }
  attack::AttackConfig acfg = cfg.attack;
  acfg.method = attack::AttackMethod::kAmi;
  acfg.metric = attack::AttackConfig::for_env(spec).metric;
  attack::AttackRunner runner(acfg, spec, frozen, 0);
  runner.load(path.string());
  return defense::AdversaryHandle{runner.adversary_spec(),
                                  runner.adversary_actor()};
}

void run_train_victims(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand, {});
  const HarnessConfig& cfg = req.config;
  auto envp = cfg.env.make();
  rl::VictimPolicySet victims(cfg.victim_config(),
                              derive_seed(req.seed, "victim-init", 0));
  const rl::TrainResult res =
      rl::train_victims(*envp, victims, cfg.train, req.seed);
  victims.save((req.out / "victims.ckpt").string());
  {
    std::ofstream out(req.out / "curve.csv");
    rl::write_curve_csv(res.curve, out);
  }
  const stats::SummaryStats eval =
      rl::evaluate_team(*envp, victims, cfg.victim_eval_episodes,
                        derive_seed(req.seed, "victim-eval", 0));
  Json summary;
  summary["schema_version"] = 1;
  summary["team_reward_mean"] = eval.mean;
  summary["team_reward_ci95"] = eval.ci95_half;
  summary["eval_episodes"] = cfg.victim_eval_episodes;
  summary["env_steps"] = res.env_steps;
  summary["aborted"] = res.aborted;
  summary["abort_reason"] = res.abort_reason;
  write_json_file(req.out, "summary.json", summary);
  record_artifact(m, req.out, "victims.ckpt");
  record_artifact(m, req.out, "curve.csv");
  record_artifact(m, req.out, "summary.json");
}

void run_attack(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand,
                  {"victims", "method", "lambda", "metric"});
  const HarnessConfig& cfg = req.config;
  const fs::path vpath = take_path(m.flags, req.subcommand, "victims");
  attack::AttackConfig acfg = cfg.attack;
  acfg.method = attack::parse_method(m.flags.value("method", "ami"));
  if (m.flags.contains("lambda")) {
    try {
      acfg.lambda = m.flags["lambda"].get<double>();
    } catch (const Json::exception&) {
      throw ConfigError("attack flag lambda must be a number");
    }
  }
  if (m.flags.contains("metric")) {
    acfg.metric =
        influence::parse_metric(m.flags["metric"].get<std::string>());
  }
  auto envp = cfg.env.make();
  const env::PosgSpec spec = envp->spec();
  rl::VictimPolicySet victims = load_victims(cfg, vpath, /*freeze=*/true);
  record_input(m, vpath);
  attack::AttackRunner runner(acfg, spec, victims, req.seed);
  const attack::AttackResult res = runner.run(*envp);
  {
    std::ofstream out(req.out / "metrics.csv");
    attack::write_attack_csv(res.metrics, out);
  }
  {
    std::ofstream out(req.out / "timing.csv");
    attack::write_timing_csv(res.metrics, out);
  }
  runner.save((req.out / "adversary.ckpt").string());
  const attack::EvalReport ev =
      runner.evaluate(*envp, acfg.eval_episodes, req.seed);
  const attack::EvalReport coop = attack::evaluate_control(
      *envp, victims, attack::ControlSlot::kCooperative, acfg.eval_episodes,
      req.seed);
  const attack::EvalReport rnd = attack::evaluate_control(
      *envp, victims, attack::ControlSlot::kRandom, acfg.eval_episodes,
      req.seed);
  Json summary;
  summary["schema_version"] = 1;
  summary["method"] = attack::method_name(acfg.method);
  summary["lambda"] = acfg.lambda;
  summary["metric"] = influence::metric_name(acfg.metric);
  summary["adv_reward_mean"] = ev.adv_reward.mean;
  summary["adv_reward_ci95"] = ev.adv_reward.ci95_half;
  summary["team_reward_mean"] = ev.team_reward.mean;
  summary["team_reward_ci95"] = ev.team_reward.ci95_half;
  summary["control_team_reward_mean"] = coop.team_reward.mean;
  summary["control_adv_reward_mean"] = coop.adv_reward.mean;
  summary["random_adv_reward_mean"] = rnd.adv_reward.mean;
  summary["eval_episodes"] = acfg.eval_episodes;
  summary["env_steps"] = res.env_steps;
  summary["aborted"] = res.aborted;
  summary["abort_reason"] = res.abort_reason;
  write_json_file(req.out, "summary.json", summary);
  record_artifact(m, req.out, "metrics.csv");
  record_artifact(m, req.out, "timing.csv", /*deterministic=*/false);
  record_artifact(m, req.out, "adversary.ckpt");
  record_artifact(m, req.out, "summary.json");
}

void run_defend(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand, {"mode", "victims", "adversary"});
  const HarnessConfig& cfg = req.config;
  if (!m.flags.contains("mode")) {
    throw ConfigError("defend requires the mode flag (at, re-ami, pos-ami)");
  }
  const std::string mode = m.flags["mode"].get<std::string>();
  if (mode != "at" && mode != "re-ami" && mode != "pos-ami") {
    throw ConfigError("unknown defend mode \"" + mode +
                      "\"; valid modes: at, re-ami, pos-ami");
  }
  const fs::path vpath = take_path(m.flags, req.subcommand, "victims");
  auto envp = cfg.env.make();
  const env::PosgSpec spec = envp->spec();

  if (mode == "at") {
    const fs::path apath = take_path(m.flags, req.subcommand, "adversary");
    rl::VictimPolicySet victims = load_victims(cfg, vpath, /*freeze=*/false);
    rl::VictimPolicySet frozen = load_victims(cfg, vpath, /*freeze=*/true);
    record_input(m, vpath);
    defense::AdversaryHandle handle = load_adversary(cfg, spec, frozen, apath);
    record_input(m, apath);
    defense::DualTrainConfig dcfg;
    dcfg.mix = cfg.defense.mix;
    dcfg.train = cfg.train;
    std::vector<rl::IterationLog> curve;
    std::size_t adversarial = 0;
    std::size_t total = 0;
    bool aborted = false;
    std::string abort_reason;
    std::size_t iter_off = 0;
    std::size_t steps_off = 0;
    for (std::size_t loop = 0; loop < cfg.defense.loop_count; ++loop) {
      defense::DualTrainResult r = defense::dual_train(
          *envp, victims, &handle, dcfg, derive_seed(req.seed, "at-loop", loop));
      for (rl::IterationLog row : r.train.curve) {
        row.iteration += iter_off;
        row.env_steps += steps_off;
        curve.push_back(row);
      }
      if (!curve.empty()) {
        iter_off = curve.back().iteration + 1;
        steps_off = curve.back().env_steps;
      }
      adversarial += r.adversarial_episodes;
      total += r.total_episodes;
      if (r.train.aborted) {
        aborted = true;
        abort_reason = r.train.abort_reason;
        break;
      }
      if (loop + 1 < cfg.defense.loop_count) {
        // Iterative refinement: retrain the attacker against the current
        // (partially hardened) team before the next dual round.
        victims.save((req.out / "victims_hardened.ckpt").string());
        rl::VictimPolicySet snapshot =
            load_victims(cfg, req.out / "victims_hardened.ckpt", true);
        attack::AttackConfig acfg = cfg.attack;
        acfg.method = attack::AttackMethod::kAmi;
        attack::AttackRunner refine(acfg, spec, snapshot,
                                    derive_seed(req.seed, "at-refine", loop));
        refine.run(*envp);
        handle = defense::AdversaryHandle{refine.adversary_spec(),
                                          refine.adversary_actor()};
      }
    }
    victims.save((req.out / "victims_hardened.ckpt").string());
    nn::save_checkpoint(handle.params, (req.out / "at_adversary.ckpt").string());
    {
      std::ofstream out(req.out / "curve.csv");
      rl::write_curve_csv(curve, out);
    }
    const attack::EvalReport under = defense::evaluate_under_adversary(
        *envp, victims, handle, cfg.victim_eval_episodes, req.seed);
    const stats::SummaryStats clean =
        rl::evaluate_team(*envp, victims, cfg.victim_eval_episodes,
                          derive_seed(req.seed, "defense-clean-eval", 0));
    Json summary;
    summary["schema_version"] = 1;
    summary["mode"] = mode;
    summary["adv_reward_mean"] = under.adv_reward.mean;
    summary["adv_reward_ci95"] = under.adv_reward.ci95_half;
    summary["team_reward_under_attack"] = under.team_reward.mean;
    summary["team_reward_mean"] = clean.mean;
    summary["team_reward_ci95"] = clean.ci95_half;
    summary["eval_episodes"] = cfg.victim_eval_episodes;
    summary["adversarial_episodes"] = adversarial;
    summary["total_episodes"] = total;
    summary["loops"] = cfg.defense.loop_count;
    summary["mix"] = cfg.defense.mix;
    summary["aborted"] = aborted;
    summary["abort_reason"] = abort_reason;
    write_json_file(req.out, "summary.json", summary);
    record_artifact(m, req.out, "victims_hardened.ckpt");
    record_artifact(m, req.out, "at_adversary.ckpt");
    record_artifact(m, req.out, "curve.csv");
    record_artifact(m, req.out, "summary.json");
    return;
  }

  if (m.flags.contains("adversary")) {
    throw ConfigError("defend mode " + mode +
                      " trains its own attackers; drop the adversary flag");
  }
  rl::VictimPolicySet victims = load_victims(cfg, vpath, /*freeze=*/true);
  record_input(m, vpath);
  attack::AttackConfig acfg = cfg.attack;
  acfg.method = attack::AttackMethod::kAmi;
  std::vector<defense::ProtocolRow> rows;
  if (mode == "re-ami") {
    rows.push_back(defense::run_re_ami(*envp, victims, acfg, req.seed));
  } else {
    rows = defense::run_pos_ami(*envp, victims, acfg, req.seed);
  }
  {
    std::ofstream out(req.out / "protocol.csv");
    defense::write_protocol_csv(rows, out);
  }
  double adv_sum = 0.0;
  double team_sum = 0.0;
  bool any_aborted = false;
  for (const auto& r : rows) {
    adv_sum += r.adv_reward;
    team_sum += r.team_reward;
    any_aborted = any_aborted || r.attack_aborted;
  }
  const double denom = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  Json summary;
  summary["schema_version"] = 1;
  summary["mode"] = mode;
  summary["rows"] = rows.size();
  summary["adv_reward_mean"] = adv_sum / denom;
  summary["team_reward_mean"] = team_sum / denom;
  summary["attack_aborted_any"] = any_aborted;
  write_json_file(req.out, "summary.json", summary);
  record_artifact(m, req.out, "protocol.csv");
  record_artifact(m, req.out, "summary.json");
}

void run_detect(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand,
                  {"signal", "victims", "train_adversary", "eval_adversary",
                   "shuffle_control"});
  const HarnessConfig& cfg = req.config;
  if (!m.flags.contains("signal")) {
    throw ConfigError("detect requires the signal flag (obs, state, action)");
  }
  const defense::DetectorSignal signal =
      defense::parse_signal(m.flags["signal"].get<std::string>());
  const fs::path vpath = take_path(m.flags, req.subcommand, "victims");
  const fs::path tpath = take_path(m.flags, req.subcommand, "train_adversary");
  const fs::path epath = take_path(m.flags, req.subcommand, "eval_adversary");
  bool shuffle_control = false;
  if (m.flags.contains("shuffle_control")) {
    try {
      shuffle_control = m.flags["shuffle_control"].get<bool>();
    } catch (const Json::exception&) {
      throw ConfigError("detect flag shuffle_control must be a boolean");
    }
  }
  auto envp = cfg.env.make();
  const env::PosgSpec spec = envp->spec();
  rl::VictimPolicySet victims = load_victims(cfg, vpath, /*freeze=*/true);
  record_input(m, vpath);
  const defense::AdversaryHandle train_adv =
      load_adversary(cfg, spec, victims, tpath);
  record_input(m, tpath);
  const defense::AdversaryHandle eval_adv =
      load_adversary(cfg, spec, victims, epath);
  record_input(m, epath);

  const std::size_t per_class = cfg.detector.episodes_per_class;
  const auto train_benign = defense::record_episodes(
      *envp, victims, nullptr, per_class,
      derive_seed(req.seed, "detect-train-benign", 0));
  const auto train_attacked = defense::record_episodes(
      *envp, victims, &train_adv, per_class,
      derive_seed(req.seed, "detect-train-attacked", 0));
  const auto eval_benign = defense::record_episodes(
      *envp, victims, nullptr, per_class,
      derive_seed(req.seed, "detect-eval-benign", 0));
  const auto eval_attacked = defense::record_episodes(
      *envp, victims, &eval_adv, per_class,
      derive_seed(req.seed, "detect-eval-attacked", 0));

  std::vector<defense::SignalEpisode> train_set =
      defense::extract_signal(train_benign, spec, signal, 0);
  {
    auto attacked = defense::extract_signal(train_attacked, spec, signal, 1);
    train_set.insert(train_set.end(), attacked.begin(), attacked.end());
  }
  std::vector<defense::SignalEpisode> eval_set =
      defense::extract_signal(eval_benign, spec, signal, 0);
  {
    auto attacked = defense::extract_signal(eval_attacked, spec, signal, 1);
    eval_set.insert(eval_set.end(), attacked.begin(), attacked.end());
  }

  defense::DetectorConfig dc = defense::DetectorConfig::for_signal(spec, signal);
  dc.hidden_dim = cfg.detector.hidden_dim;
  dc.lr = cfg.detector.lr;
  dc.epochs = cfg.detector.epochs;
  dc.minibatch_num = cfg.detector.minibatch_num;
  dc.max_grad_norm = cfg.detector.max_grad_norm;
  defense::Detector detector(dc, derive_seed(req.seed, "detector", 0));
  auto train_eng = make_engine(req.seed, "detector-train", 0);
  const defense::DetectorTrainStats tstats =
      detector.train(train_set, train_eng);
  detector.save((req.out / "detector.ckpt").string());
  const auto curve = defense::accuracy_curve(detector, eval_set);
  {
    std::ofstream out(req.out / "accuracy.csv");
    defense::write_accuracy_csv(curve, out);
  }
  Json summary;
  summary["schema_version"] = 1;
  summary["signal"] = defense::signal_name(signal);
  summary["auc"] = defense::episode_auc(detector, eval_set);
  summary["train_accuracy"] = tstats.train_accuracy;
  summary["final_epoch_loss"] =
      tstats.epoch_loss.empty() ? 0.0 : tstats.epoch_loss.back();
  summary["accuracy_first"] = curve.empty() ? 0.0 : curve.front().accuracy;
  summary["accuracy_last"] = curve.empty() ? 0.0 : curve.back().accuracy;
  summary["episodes_per_class"] = per_class;
  summary["warnings"] = tstats.warnings;
  if (shuffle_control) {
    std::vector<defense::SignalEpisode> shuffled = train_set;
    auto shuffle_eng = make_engine(req.seed, "label-shuffle", 0);
    defense::shuffle_labels(shuffled, shuffle_eng);
    defense::Detector control(dc, derive_seed(req.seed, "detector-control", 0));
    auto ctrl_eng = make_engine(req.seed, "detector-control-train", 0);
    control.train(shuffled, ctrl_eng);
    summary["shuffle_control_auc"] = defense::episode_auc(control, eval_set);
  }
  write_json_file(req.out, "summary.json", summary);
  record_artifact(m, req.out, "detector.ckpt");
  record_artifact(m, req.out, "accuracy.csv");
  record_artifact(m, req.out, "summary.json");
}

void run_ablate(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand,
                  {"victims", "sweep", "values", "seeds", "method"});
  const fs::path vpath = take_path(m.flags, req.subcommand, "victims");
  if (!fs::exists(vpath)) {
    throw ConfigError("victim checkpoint not found: " + vpath.string());
  }
  if (!m.flags.contains("sweep")) {
    throw ConfigError("ablate requires the sweep flag (lambda or metric)");
  }
  const std::string sweep = m.flags["sweep"].get<std::string>();
  if (sweep != "lambda" && sweep != "metric") {
    throw ConfigError("unknown sweep \"" + sweep +
                      "\"; valid sweeps: lambda, metric");
  }
  if (!m.flags.contains("values") || !m.flags["values"].is_array() ||
      m.flags["values"].empty()) {
    throw ConfigError("ablate requires a non-empty values array");
  }
  std::size_t seeds = 5;  // default seed count for statistical comparisons
  if (m.flags.contains("seeds")) {
    if (!m.flags["seeds"].is_number_unsigned() ||
        m.flags["seeds"].get<std::size_t>() == 0) {
      throw ConfigError("ablate flag seeds must be a positive integer");
    }
    seeds = m.flags["seeds"].get<std::size_t>();
  }
  m.flags["seeds"] = seeds;
  const std::string method = m.flags.value("method", "ami");
  attack::parse_method(method);  // fail early on an unknown name
  m.flags["method"] = method;
  record_input(m, vpath);

  Json index;
  index["schema_version"] = 1;
  index["sweep"] = sweep;
  index["values"] = m.flags["values"];
  Json children = Json::array();
  for (const Json& value : m.flags["values"]) {
    std::string child_label;
    Json child_flags;
    child_flags["victims"] = vpath.string();
    child_flags["method"] = method;
    if (sweep == "lambda") {
      if (!value.is_number()) {
        throw ConfigError("lambda sweep values must be numbers");
      }
      child_label = "lambda-" + format_compact(value.get<double>());
      child_flags["lambda"] = value.get<double>();
    } else {
      if (!value.is_string()) {
        throw ConfigError("metric sweep values must be metric names");
      }
      influence::parse_metric(value.get<std::string>());
      child_label = "metric-" + value.get<std::string>();
      child_flags["metric"] = value.get<std::string>();
    }
    for (std::size_t k = 0; k < seeds; ++k) {
      const std::uint64_t child_seed = req.seed + k;
      RunRequest child;
      child.subcommand = "attack";
      child.config = req.config;
      child.flags = child_flags;
      child.seed = child_seed;
      child.label = child_label;
      const std::string rel =
          child_label + "/seed-" + std::to_string(child_seed);
      child.out = req.out / rel;
      const RunManifest cm = execute_run(child);
      for (const ArtifactRecord& art : cm.artifacts) {
        ArtifactRecord lifted = art;
        lifted.path = rel + "/" + art.path;
        m.artifacts.push_back(lifted);
      }
      Json entry;
      entry["dir"] = rel;
      entry["label"] = child_label;
      entry["seed"] = child_seed;
      children.push_back(entry);
    }
  }
  index["children"] = children;
  write_json_file(req.out, "index.json", index);
  record_artifact(m, req.out, "index.json");
}

void run_report(const RunRequest& req, RunManifest& m) {
  check_flag_keys(m.flags, req.subcommand, {"runs"});
  if (!m.flags.contains("runs") || !m.flags["runs"].is_array() ||
      m.flags["runs"].empty()) {
    throw ConfigError("report requires a non-empty runs array");
  }
  std::vector<fs::path> dirs;
  Json resolved = Json::array();
  for (const Json& entry : m.flags["runs"]) {
    if (!entry.is_string()) {
      throw ConfigError("report runs entries must be directory paths");
    }
    const fs::path abs = fs::absolute(entry.get<std::string>());
    dirs.push_back(abs);
    resolved.push_back(abs.string());
  }
  m.flags["runs"] = resolved;
  const ComparisonReport report = build_comparison(dirs);
  for (const std::string& src : report.sources) {
    record_input(m, src);
  }
  const std::vector<std::string> written =
      write_report_files(report, req.out);
  for (const std::string& rel : written) {
    record_artifact(m, req.out, rel);
  }
}

}  // namespace

RunManifest execute_run(const RunRequest& req) {
  static const char* known[] = {"train-victims", "attack", "defend",
                                "detect",        "ablate", "report"};
  if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
        return req.subcommand == k;
      }) == std::end(known)) {
    throw ConfigError("unknown subcommand \"" + req.subcommand +
                      "\"; valid subcommands: train-victims, attack, defend, "
                      "detect, ablate, report");
  }
  if (req.out.empty()) {
    throw ConfigError("run output directory must not be empty");
  }
  fs::create_directories(req.out);
  RunManifest m;
  m.subcommand = req.subcommand;
  m.label = req.label.empty() ? req.subcommand : req.label;
  m.seed = req.seed;
  m.flags = req.flags.is_null() ? Json::object() : req.flags;
  if (req.subcommand == "report") {
    m.config = Json::object();
    m.env_spec = Json::object();
  } else {
    req.config.validate();
    m.config = config_to_json(req.config);
    m.env_spec = env_spec_json(req.config);
  }
  m.started_utc = utc_timestamp();
  if (req.subcommand == "train-victims") {
    run_train_victims(req, m);
  } else if (req.subcommand == "attack") {
    run_attack(req, m);
  } else if (req.subcommand == "defend") {
    run_defend(req, m);
  } else if (req.subcommand == "detect") {
    run_detect(req, m);
  } else if (req.subcommand == "ablate") {
    run_ablate(req, m);
  } else {
    run_report(req, m);
  }
  m.finished_utc = utc_timestamp();
  save_manifest(m, req.out);
  return m;
}

RunManifest replay_run(const std::filesystem::path& manifest_path,
                       const std::filesystem::path& out_dir) {
  const RunManifest original = load_manifest_file(manifest_path);
  for (const ArtifactRecord& in : original.inputs) {
    if (!fs::exists(in.path)) {
      throw ConfigError("replay input not found: " + in.path);
    }
    if (in.deterministic && file_hash_hex(in.path) != in.hash_hex) {
      throw IntegrityError("replay input changed since the original run: " +
                           in.path);
    }
  }
  RunRequest req;
  req.subcommand = original.subcommand;
  req.flags = original.flags;
  req.seed = original.seed;
  req.out = out_dir;
  req.label = original.label;
  if (original.subcommand != "report") {
    req.config = parse_config(original.config);
  }
  const RunManifest fresh = execute_run(req);
  for (const ArtifactRecord& want : original.artifacts) {
    if (!want.deterministic) continue;
    const auto it = std::find_if(
        fresh.artifacts.begin(), fresh.artifacts.end(),
        [&](const ArtifactRecord& a) { return a.path == want.path; });
    if (it == fresh.artifacts.end()) {
      throw IntegrityError("replay produced no artifact " + want.path);
    }
    if (it->hash_hex != want.hash_hex) {
      throw IntegrityError("replay diverged on " + want.path);
    }
  }
  return fresh;
}

std::filesystem::path default_out_root() {
  if (const char* root = std::getenv("AMI_OUT")) {
    if (root[0] != '\0') return fs::path(root);
  }
  return fs::path("runs");
}

std::string format_compact(double v) {
  char buf[32];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

}  // namespace ami::harness
