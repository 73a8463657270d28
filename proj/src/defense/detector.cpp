#include "ami/defense/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "ami/nn/heads.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/rl/ppo.hpp"
#include "ami/rng.hpp"
#include "ami/stats.hpp"

namespace ami::defense {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Numerically stable BCE from the logit.
double bce_from_logit(double logit, double y) {
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::fabs(logit)));
}

void check_features(const std::vector<SignalEpisode>& data,
                    std::size_t input_dim) {
  if (data.empty()) throw ConfigError("detector needs at least one episode");
  for (const auto& ep : data) {
    if (ep.features.empty()) {
      throw ConfigError("detector episode has no timesteps");
    }
    for (const auto& f : ep.features) {
      if (f.size() != input_dim) {
        throw ConfigError("detector feature size disagrees with input_dim");
      }
    }
  }
}

}  // namespace

DetectorSignal parse_signal(std::string_view name) {
  if (name == "obs") return DetectorSignal::kObs;
  if (name == "state") return DetectorSignal::kState;
  if (name == "action") return DetectorSignal::kAction;
  throw ConfigError("unknown detector signal: " + std::string(name) +
                    " (expected obs, state, action)");
}

std::string signal_name(DetectorSignal signal) {
  switch (signal) {
    case DetectorSignal::kObs: return "obs";
    case DetectorSignal::kState: return "state";
    case DetectorSignal::kAction: return "action";
  }
  throw ConfigError("unknown detector signal enum value");
}

std::size_t signal_dim(const env::PosgSpec& spec, DetectorSignal signal) {
  switch (signal) {
    case DetectorSignal::kObs: return spec.n_agents() * spec.obs_dim;
    case DetectorSignal::kState: return spec.state_dim;
    case DetectorSignal::kAction:
      return spec.n_agents() *
             (spec.discrete ? spec.num_actions : spec.action_dim);
  }
  throw ConfigError("unknown detector signal enum value");
}

std::vector<RecordedEpisode> record_episodes(
    env::Environment& env, const rl::VictimPolicySet& victims,
    const AdversaryHandle* adversary, std::size_t episodes,
    std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("recording needs at least 1 episode");
  const auto& spec = env.spec();
  const std::size_t slot = spec.adversary_index();
  if (adversary != nullptr) adversary->check(spec);
  std::vector<RecordedEpisode> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(derive_seed(seed, "record-episode", e));
    RecordedEpisode ep;
    while (!env.done()) {
      ep.states.push_back(env.state());
      std::vector<Vec> obs;
      for (std::size_t agent = 0; agent < spec.n_agents(); ++agent) {
        obs.push_back(env.observe(agent));
      }
      env::JointAction ja;
      if (spec.discrete) {
        ja.discrete.resize(spec.n_agents());
      } else {
        ja.continuous.resize(spec.n_agents());
      }
      for (std::size_t agent = 0; agent < spec.n_agents(); ++agent) {
        if (adversary != nullptr && agent == slot) {
          adversary->act(obs[agent], nullptr, ja, slot);
          continue;
        }
        const auto va = victims.act(agent, obs[agent], nullptr);
        if (spec.discrete) {
          ja.discrete[agent] = va.discrete;
        } else {
          ja.continuous[agent] = va.continuous;
        }
      }
      const auto rec = env.step(ja);
      ep.joint_obs.push_back(std::move(obs));
      ep.actions.push_back(ja);
      ep.adv_reward += rec.adversary_reward;
      ep.team_reward += rec.team_reward;
    }
    out.push_back(std::move(ep));
  }
  return out;
}

std::vector<SignalEpisode> extract_signal(
    const std::vector<RecordedEpisode>& episodes, const env::PosgSpec& spec,
    DetectorSignal signal, unsigned char label) {
  std::vector<SignalEpisode> out;
  for (const auto& ep : episodes) {
    SignalEpisode se;
    se.label = label;
    const std::size_t steps = ep.states.size();
    for (std::size_t t = 0; t < steps; ++t) {
      Vec f;
      switch (signal) {
        case DetectorSignal::kObs:
          for (const auto& o : ep.joint_obs[t]) {
            f.insert(f.end(), o.begin(), o.end());
          }
          break;
        case DetectorSignal::kState:
          f = ep.states[t];
          break;
        case DetectorSignal::kAction:
          if (spec.discrete) {
            for (std::size_t a : ep.actions[t].discrete) {
              Vec onehot(spec.num_actions, 0.0);
              if (a >= spec.num_actions) {
                throw ProtocolError("recorded action out of range");
              }
              onehot[a] = 1.0;
              f.insert(f.end(), onehot.begin(), onehot.end());
            }
          } else {
            for (const auto& a : ep.actions[t].continuous) {
              f.insert(f.end(), a.begin(), a.end());
            }
          }
          break;
      }
      if (f.size() != signal_dim(spec, signal)) {
        throw ProtocolError("signal extraction produced the wrong size");
      }
      se.features.push_back(std::move(f));
    }
    out.push_back(std::move(se));
  }
  return out;
}

void shuffle_labels(std::vector<SignalEpisode>& data, std::mt19937_64& rng) {
  std::vector<unsigned char> labels;
  for (const auto& ep : data) labels.push_back(ep.label);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = labels[i];
}

DetectorConfig DetectorConfig::for_signal(const env::PosgSpec& spec,
                                          DetectorSignal signal) {
  DetectorConfig cfg;
  cfg.input_dim = signal_dim(spec, signal);
  return cfg;
}

void DetectorConfig::validate() const {
  if (input_dim == 0) throw ConfigError("detector input_dim must be positive");
  if (hidden_dim == 0) {
    throw ConfigError("detector hidden_dim must be positive");
  }
  if (lr <= 0.0) throw ConfigError("detector lr must be positive");
  if (epochs == 0 || minibatch_num == 0) {
    throw ConfigError("detector schedule counts must be at least 1");
  }
  if (max_grad_norm <= 0.0) {
    throw ConfigError("max_grad_norm must be positive");
  }
}

Detector::Detector(const DetectorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  gru_.input_dim = cfg_.input_dim;
  gru_.hidden_dim = cfg_.hidden_dim;
  auto eng = make_engine(seed, "detector-init", 0);
  params_ = nn::init_gru_params(gru_, eng);
  auto& hw = params_.add("head/W", {1, cfg_.hidden_dim});
  nn::orthogonal_fill(hw.values, 1, cfg_.hidden_dim, 0.01, eng);
  params_.add("head/b", {1});
  nn::AdamConfig acfg;
  acfg.lr = cfg_.lr;
  adam_ = nn::make_adam(params_, acfg);
}

Vec Detector::score(const std::vector<Vec>& features) const {
  if (features.empty()) throw ConfigError("cannot score an empty episode");
  const auto& hw = params_.block("head/W").values;
  const double hb = params_.block("head/b").values[0];
  Vec h(cfg_.hidden_dim, 0.0);
  Vec probs;
  for (const auto& x : features) {
    if (x.size() != cfg_.input_dim) {
      throw ConfigError("detector feature size disagrees with input_dim");
    }
    h = nn::gru_step(gru_, params_, x, h, nullptr);
    double logit = hb;
    for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) logit += hw[j] * h[j];
    probs.push_back(sigmoid(logit));
  }
  return probs;
}

DetectorTrainStats Detector::train(const std::vector<SignalEpisode>& data,
                                   std::mt19937_64& rng) {
  check_features(data, cfg_.input_dim);
  DetectorTrainStats stats;
  std::size_t positives = 0;
  for (const auto& ep : data) positives += ep.label ? 1 : 0;
  const std::size_t negatives = data.size() - positives;
  const std::size_t minority = std::min(positives, negatives);
  if (minority * 5 < data.size()) {
    stats.warnings.push_back(
        "class imbalance: " + std::to_string(positives) + " attacked vs " +
        std::to_string(negatives) + " benign episodes");
  }

  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto chunks =
        rl::minibatch_indices(data.size(), cfg_.minibatch_num, rng);
    for (const auto& chunk : chunks) {
      auto grads = params_.zeros_like();
      auto& ghw = grads.block("head/W").values;
      auto& ghb = grads.block("head/b").values;
      const auto& hw = params_.block("head/W").values;
      const double inv_chunk = 1.0 / static_cast<double>(chunk.size());
      for (std::size_t idx : chunk) {
        const auto& ep = data[idx];
        const double y = ep.label ? 1.0 : 0.0;
        const std::size_t steps = ep.features.size();
        const double inv_t = 1.0 / static_cast<double>(steps);
        std::vector<nn::GruStepCache> caches(steps);
        std::vector<Vec> hs(steps);
        Vec h(cfg_.hidden_dim, 0.0);
        Vec logits(steps);
        for (std::size_t t = 0; t < steps; ++t) {
          h = nn::gru_step(gru_, params_, ep.features[t], h, &caches[t]);
          hs[t] = h;
          double logit = params_.block("head/b").values[0];
          for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
            logit += hw[j] * h[j];
          }
          logits[t] = logit;
          epoch_loss += bce_from_logit(logit, y) * inv_t /
                        static_cast<double>(data.size());
        }
        Vec dh_next(cfg_.hidden_dim, 0.0);
        for (std::size_t t = steps; t-- > 0;) {
          const double dlogit =
              (sigmoid(logits[t]) - y) * inv_t * inv_chunk;
          ghb[0] += dlogit;
          Vec dh = dh_next;
          for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
            ghw[j] += dlogit * hs[t][j];
            dh[j] += dlogit * hw[j];
          }
          Vec dh_prev;
          nn::gru_backward_step(gru_, params_, caches[t], dh, grads, dh_prev);
          dh_next = dh_prev;
        }
      }
      nn::gradient_clip(grads, cfg_.max_grad_norm);
      nn::adam_step(params_, grads, adam_);
    }
    stats.epoch_loss.push_back(epoch_loss);
  }

  std::size_t correct = 0;
  for (const auto& ep : data) {
    const double p = score(ep.features).back();
    if ((p > 0.5) == (ep.label != 0)) ++correct;
  }
  stats.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(data.size());
  return stats;
}

void Detector::save(const std::string& path) const {
  nn::save_checkpoint(params_, path);
}

void Detector::load(const std::string& path) {
  auto loaded = nn::load_checkpoint(path);
  if (loaded.total_size() != params_.total_size() ||
      !loaded.has("head/W") || !loaded.has("Wr")) {
    throw ConfigError("detector checkpoint layout mismatch");
  }
  params_ = std::move(loaded);
}

std::vector<AccuracyPoint> accuracy_curve(
    const Detector& detector, const std::vector<SignalEpisode>& eval) {
  if (eval.empty()) throw ConfigError("accuracy curve needs episodes");
  std::vector<Vec> scores;
  std::size_t max_len = 0;
  for (const auto& ep : eval) {
    scores.push_back(detector.score(ep.features));
    max_len = std::max(max_len, ep.features.size());
  }
  std::vector<AccuracyPoint> curve;
  for (std::size_t t = 0; t < max_len; ++t) {
    Vec pos, neg;
    std::size_t correct = 0, alive = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      if (t >= scores[i].size()) continue;
      ++alive;
      const double p = scores[i][t];
      const bool attacked = eval[i].label != 0;
      if ((p > 0.5) == attacked) ++correct;
      (attacked ? pos : neg).push_back(p);
    }
    if (pos.empty() || neg.empty()) continue;
    AccuracyPoint point;
    point.t = t;
    point.accuracy = static_cast<double>(correct) / static_cast<double>(alive);
    point.auc = stats::roc_auc(pos, neg);
    curve.push_back(point);
  }
  return curve;
}

double episode_auc(const Detector& detector,
                   const std::vector<SignalEpisode>& eval) {
  Vec pos, neg;
  for (const auto& ep : eval) {
    const double p = detector.score(ep.features).back();
    (ep.label != 0 ? pos : neg).push_back(p);
  }
  return stats::roc_auc(pos, neg);
}

void write_accuracy_csv(const std::vector<AccuracyPoint>& curve,
                        std::ostream& out) {
  out << "t,accuracy,auc\n";
  out << std::setprecision(12);
  for (const auto& p : curve) {
    out << p.t << ',' << p.accuracy << ',' << p.auc << '\n';
  }
}

}  // namespace ami::defense
