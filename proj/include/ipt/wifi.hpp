#pragma once

// WiFi fingerprinting: a radiomap built from scans positioned along
// pseudo-label trajectories, weighted k-NN matching, and a semi-supervised
// VAE whose latent mean feeds a position regressor.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/geometry.hpp"
#include "ipt/core/text.hpp"
#include "ipt/ingest.hpp"
#include "ipt/labels.hpp"
#include "ipt/nn/adam.hpp"
#include "ipt/nn/checkpoint.hpp"
#include "ipt/nn/mlp.hpp"
#include "ipt/nn/random.hpp"

namespace ipt {

struct Fingerprint {
  double timestamp = 0.0;
  std::vector<double> rss;             // dBm over the map dictionary, kRssFloor when absent
  std::optional<FloorPoint> position;  // set for labeled fingerprints
};

struct RadioMap {
  std::vector<std::string> ap_dictionary;  // sorted, unique
  std::vector<Fingerprint> fingerprints;

  std::size_t labeled_count() const {
    return static_cast<std::size_t>(std::count_if(fingerprints.begin(), fingerprints.end(),
                                                  [](const Fingerprint& f) { return f.position.has_value(); }));
  }
  double labeled_fraction() const {
    return fingerprints.empty() ? 0.0 : static_cast<double>(labeled_count()) / static_cast<double>(fingerprints.size());
  }
};

/// Dense RSS vector over `dictionary`; APs outside it are ignored.
inline std::vector<double> dense_rss(const WifiScan& scan, const std::vector<std::string>& dictionary) {
  std::vector<double> v(dictionary.size(), kRssFloor);
  for (const auto& [ap, rss] : scan.readings) {
    const auto it = std::lower_bound(dictionary.begin(), dictionary.end(), ap);
    if (it != dictionary.end() && *it == ap) v[static_cast<std::size_t>(it - dictionary.begin())] = rss;
  }
  return v;
}

inline double normalize_rss(double rss) { return (rss - kRssFloor) / -kRssFloor; }
inline double denormalize_rss(double v) { return v * -kRssFloor + kRssFloor; }

/// Maps a timestamp to a position, or nothing outside the known span.
using Positioner = std::function<std::optional<FloorPoint>(double)>;

inline Positioner trajectory_positioner(PseudoTrajectory traj) {
  return [traj = std::move(traj)](double t) -> std::optional<FloorPoint> {
    if (!traj.covers(t)) return std::nullopt;
    return traj.position(t);
  };
}

struct TrackScans {
  std::vector<WifiScan> scans;
  Positioner position;  // empty for tracks without landmarks
};

/// Dictionary = sorted union of all AP ids. Scans inside a positioner's span
/// become labeled fingerprints; all others stay unlabeled.
inline RadioMap build_radiomap(const std::vector<TrackScans>& tracks) {
  RadioMap map;
  std::vector<std::string> ids;
  std::size_t n_scans = 0;
  for (const auto& tr : tracks)
    for (const auto& s : tr.scans) {
      ++n_scans;
      for (const auto& [ap, _] : s.readings) ids.push_back(ap);
    }
  if (n_scans == 0) fail(Errc::empty_map, "no WiFi scans to build a radiomap from");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  map.ap_dictionary = std::move(ids);
  for (const auto& tr : tracks)
    for (const auto& s : tr.scans) {
      Fingerprint f{s.timestamp, dense_rss(s, map.ap_dictionary), std::nullopt};
      if (tr.position) f.position = tr.position(s.timestamp);
      map.fingerprints.push_back(std::move(f));
    }
  return map;
}

/// An absolute position estimate with an isotropic 1-sigma uncertainty.
struct WifiFix {
  double timestamp = 0.0;
  Vec2 position;
  int floor = 0;
  double sigma = 1.0;
  bool low_confidence = false;
};

inline double rss_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

/// Weighted k-NN over labeled fingerprints with w = 1 / max(d, 0.01).
/// Ties in RSS distance break by (x, y, floor) so the result does not
/// depend on fingerprint order. Sigma is the weighted spread of the
/// neighbours about the estimate, at least `min_sigma`.
inline WifiFix knn_predict(const RadioMap& map, const WifiScan& scan, std::size_t k = 5, double min_sigma = 1.0) {
  if (k == 0) fail(Errc::config, "k must be positive");
  if (map.labeled_count() < k)
    fail(Errc::insufficient_data, "k-NN needs " + std::to_string(k) + " labeled fingerprints, map has " +
                                      std::to_string(map.labeled_count()));
  const std::vector<double> q = dense_rss(scan, map.ap_dictionary);
  struct Cand {
    double d;
    const FloorPoint* p;
  };
  std::vector<Cand> cands;
  for (const auto& f : map.fingerprints)
    if (f.position) cands.push_back({rss_distance(q, f.rss), &*f.position});
  auto less = [](const Cand& a, const Cand& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.p->xy.x != b.p->xy.x) return a.p->xy.x < b.p->xy.x;
    if (a.p->xy.y != b.p->xy.y) return a.p->xy.y < b.p->xy.y;
    return a.p->floor < b.p->floor;
  };
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), less);

  double wsum = 0.0;
  Vec2 acc{};
  std::map<int, double> floor_votes;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / std::max(cands[i].d, 0.01);
    wsum += w;
    acc += cands[i].p->xy * w;
    floor_votes[cands[i].p->floor] += w;
  }
  WifiFix fix;
  fix.timestamp = scan.timestamp;
  fix.position = acc * (1.0 / wsum);
  double best = -1.0;
  for (const auto& [fl, v] : floor_votes)
    if (v > best) {
      best = v;
      fix.floor = fl;
    }
  double spread = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    spread += (1.0 / std::max(cands[i].d, 0.01)) * (cands[i].p->xy - fix.position).squared_norm();
  fix.sigma = std::max(min_sigma, std::sqrt(spread / wsum));
  return fix;
}

// ---------------------------------------------------------------------------
// Semi-supervised VAE

struct VaeConfig {
  std::size_t latent_dim = 8;
  std::vector<std::size_t> encoder{64};
  std::vector<std::size_t> decoder{64};
  std::vector<std::size_t> regressor{64};
  double beta_recon = 1.0;
  double beta_kl = 0.1;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double validation_fraction = 0.2;  // of labeled fingerprints, held out to calibrate sigma
  double min_sigma = 1.0;
  std::uint64_t seed = 0;
};

struct VaeModel {
  VaeConfig cfg;
  std::vector<std::string> dictionary;
  nn::Mlp encoder;    // rss -> (mu, log sigma^2)
  nn::Mlp decoder;    // z -> logits of normalized rss
  nn::Mlp regressor;  // mu -> normalized (x, y)
  Vec2 center;
  double scale = 1.0;
  double sigma = 1.0;  // validation RMSE
  int floor = 0;
  std::vector<double> history;  // mean training objective per epoch

  std::vector<nn::Tensor*> parameters() {
    std::vector<nn::Tensor*> out;
    for (nn::Mlp* m : {&encoder, &decoder, &regressor})
      for (nn::Tensor* p : m->parameters()) out.push_back(p);
    return out;
  }
  std::vector<nn::Tensor> zero_gradients() const {
    std::vector<nn::Tensor> out;
    for (const nn::Mlp* m : {&encoder, &decoder, &regressor})
      for (auto& g : m->zero_gradients()) out.push_back(std::move(g));
    return out;
  }
};

inline void validate(const VaeConfig& cfg) {
  if (cfg.latent_dim < 2) fail(Errc::config, "latent_dim must be at least 2");
  if (cfg.beta_recon < 0.0 || cfg.beta_kl < 0.0) fail(Errc::config, "loss weights must be non-negative");
  if (!(cfg.lr > 0.0)) fail(Errc::config, "learning rate must be positive");
  if (cfg.batch_size == 0) fail(Errc::config, "batch size must be positive");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
    fail(Errc::config, "validation_fraction must lie in [0, 1)");
}

namespace detail {

inline std::vector<nn::LayerSpec> mlp_specs(const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<nn::LayerSpec> s;
  for (std::size_t h : hidden) {
    s.push_back(nn::LayerSpec::dense(h));
    s.push_back(nn::LayerSpec::relu());
  }
  s.push_back(nn::LayerSpec::dense(out));
  return s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// Builds an untrained model over `dictionary` with seeded parameters.
inline VaeModel make_vae(const VaeConfig& cfg, std::vector<std::string> dictionary) {
  validate(cfg);
  if (dictionary.empty()) fail(Errc::empty_map, "empty AP dictionary");
  VaeModel m;
  m.cfg = cfg;
  m.dictionary = std::move(dictionary);
  const std::size_t a = m.dictionary.size(), l = cfg.latent_dim;
  nn::Rng rng(cfg.seed);
  m.encoder = nn::Mlp({a}, detail::mlp_specs(cfg.encoder, 2 * l), rng);
  m.decoder = nn::Mlp({l}, detail::mlp_specs(cfg.decoder, a), rng);
  m.regressor = nn::Mlp({l}, detail::mlp_specs(cfg.regressor, 2), rng);
  return m;
}

/// One training example: normalized RSS and, when labeled, the normalized target.
struct VaeSample {
  std::vector<double> x;
  std::optional<Vec2> target;
};

struct VaeLoss {
  double total = 0.0;
  double reg = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

/// Batch objective L_reg + beta_recon * L_recon + beta_kl * KL with the given
/// standard-normal draws (one vector of latent_dim per sample). L_reg is the
/// mean Euclidean error over the labeled samples of the batch; the other two
/// terms are means over all samples. Gradients (layout of parameters()) are
/// accumulated into `grads` when given.
inline VaeLoss vae_objective(const VaeModel& m, std::span<const VaeSample> batch,
                             std::span<const std::vector<double>> noise, std::vector<nn::Tensor>* grads) {
  if (batch.empty()) fail(Errc::empty_batch, "VAE objective over an empty batch");
  const std::size_t l = m.cfg.latent_dim, a = m.dictionary.size();
  const auto n_enc = m.encoder.zero_gradients().size(), n_dec = m.decoder.zero_gradients().size();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const auto n_lab = static_cast<double>(
      std::count_if(batch.begin(), batch.end(), [](const VaeSample& s) { return s.target.has_value(); }));
  VaeLoss loss;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const VaeSample& s = batch[i];
    std::vector<nn::LayerCache> ce, cd, cr;
    const nn::Tensor h = m.encoder.forward(nn::Tensor({a}, s.x), ce);
    nn::Tensor z({l}), mu({l});
    for (std::size_t j = 0; j < l; ++j) {
      mu[j] = h[j];
      z[j] = h[j] + std::exp(0.5 * h[l + j]) * noise[i][j];
    }
    const nn::Tensor logits = m.decoder.forward(z, cd);
    double recon = 0.0;
    nn::Tensor dlogits({a});
    for (std::size_t k = 0; k < a; ++k) {
      const double r = detail::sigmoid(logits[k]);
      recon += (r - s.x[k]) * (r - s.x[k]);
      dlogits[k] = m.cfg.beta_recon * inv_b * (2.0 / static_cast<double>(a)) * (r - s.x[k]) * r * (1.0 - r);
    }
    recon /= static_cast<double>(a);
    double kl = 0.0;
    for (std::size_t j = 0; j < l; ++j) kl += -0.5 * (1.0 + h[l + j] - h[j] * h[j] - std::exp(h[l + j]));
    double reg = 0.0;
    nn::Tensor dmu_reg({l}, 0.0);
    std::vector<nn::LayerCache> creg;
    nn::Tensor y;
    if (s.target) {
      y = m.regressor.forward(mu, creg);
      const double dx = y[0] - s.target->x, dy = y[1] - s.target->y;
      reg = std::sqrt(dx * dx + dy * dy);
      loss.reg += reg / n_lab;
    }
    loss.recon += recon * inv_b;
    loss.kl += kl * inv_b;

    if (grads) {
      std::span<nn::Tensor> all(*grads);
      if (s.target) {
        const double dx = y[0] - s.target->x, dy = y[1] - s.target->y;
        const double nrm = std::sqrt(dx * dx + dy * dy + 1e-12);
        nn::Tensor dy_t({2}, {dx / (nrm * n_lab), dy / (nrm * n_lab)});
        dmu_reg = m.regressor.backward(dy_t, creg, all.subspan(n_enc + n_dec));
      }
      const nn::Tensor dz = m.decoder.backward(dlogits, cd, all.subspan(n_enc, n_dec));
      nn::Tensor dh({2 * l});
      for (std::size_t j = 0; j < l; ++j) {
        const double sd = std::exp(0.5 * h[l + j]);
        dh[j] = dz[j] + dmu_reg[j] + m.cfg.beta_kl * inv_b * h[j];
        dh[l + j] = dz[j] * noise[i][j] * 0.5 * sd + m.cfg.beta_kl * inv_b * 0.5 * (std::exp(h[l + j]) - 1.0);
      }
      m.encoder.backward(dh, ce, all.subspan(0, n_enc));
    }
  }
  loss.total = loss.reg + m.cfg.beta_recon * loss.recon + m.cfg.beta_kl * loss.kl;
  return loss;
}

/// Deterministic position through the latent mean, in metres.
inline Vec2 vae_position(const VaeModel& m, const std::vector<double>& normalized_rss) {
  std::vector<nn::LayerCache> c;
  const nn::Tensor h = m.encoder.forward(nn::Tensor({m.dictionary.size()}, normalized_rss), c);
  nn::Tensor mu({m.cfg.latent_dim});
  for (std::size_t j = 0; j < m.cfg.latent_dim; ++j) mu[j] = h[j];
  const nn::Tensor y = m.regressor.forward(mu, c);
  return m.center + Vec2{y[0], y[1]} * m.scale;
}

inline std::vector<double> normalized(const std::vector<double>& rss) {
  std::vector<double> out(rss.size());
  std::transform(rss.begin(), rss.end(), out.begin(), normalize_rss);
  return out;
}

/// Trains on every fingerprint (labeled or not) except a held-out share of
/// the labeled ones, which selects the best epoch and calibrates sigma as
/// the held-out RMSE.
inline VaeModel train_vae(const RadioMap& map, const VaeConfig& cfg) {
  validate(cfg);
  const std::size_t n_labeled = map.labeled_count();
  if (n_labeled == 0) fail(Errc::cannot_train, "radiomap has no labeled fingerprints");
  VaeModel m = make_vae(cfg, map.ap_dictionary);

  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < map.fingerprints.size(); ++i)
    if (map.fingerprints[i].position) labeled.push_back(i);
  nn::Rng split_rng(nn::mix_keys(cfg.seed, 0x56414cULL));
  for (std::size_t i = labeled.size(); i > 1; --i) std::swap(labeled[i - 1], labeled[split_rng.index(i)]);
  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n_labeled)));
  if (n_val >= n_labeled) n_val = n_labeled - 1;
  std::vector<bool> is_val(map.fingerprints.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[labeled[i]] = true;

  // Coordinate normalization and floor from the training labels.
  Vec2 c{};
  std::map<int, std::size_t> floors;
  std::size_t n_train_lab = 0;
  for (std::size_t i = 0; i < map.fingerprints.size(); ++i)
    if (map.fingerprints[i].position && !is_val[i]) {
      c += map.fingerprints[i].position->xy;
      ++floors[map.fingerprints[i].position->floor];
      ++n_train_lab;
    }
  c = c * (1.0 / static_cast<double>(n_train_lab));
  double var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < map.fingerprints.size(); ++i)
    if (map.fingerprints[i].position && !is_val[i]) {
      const Vec2 d = map.fingerprints[i].position->xy - c;
      var_x += d.x * d.x;
      var_y += d.y * d.y;
    }
  const double sd = std::sqrt(std::max(var_x, var_y) / static_cast<double>(n_train_lab));
  m.center = c;
  m.scale = sd > 1e-9 ? sd : 1.0;
  m.floor = std::max_element(floors.begin(), floors.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;

  std::vector<VaeSample> train;
  std::vector<std::pair<std::vector<double>, Vec2>> val;
  for (std::size_t i = 0; i < map.fingerprints.size(); ++i) {
    const auto& f = map.fingerprints[i];
    if (is_val[i]) {
      val.emplace_back(normalized(f.rss), f.position->xy);
      continue;
    }
    VaeSample s{normalized(f.rss), std::nullopt};
    if (f.position) s.target = (f.position->xy - m.center) * (1.0 / m.scale);
    train.push_back(std::move(s));
  }

  auto rmse = [&](const VaeModel& model, const auto& set) {
    double acc = 0.0;
    for (const auto& [x, p] : set) acc += (vae_position(model, x) - p).squared_norm();
    return std::sqrt(acc / static_cast<double>(set.size()));
  };

  nn::AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  nn::AdamState adam;
  auto params = m.parameters();
  std::vector<std::size_t> order(train.size());
  std::optional<VaeModel> best;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng shuffle(nn::mix_keys(cfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<VaeSample> batch;
      std::vector<std::vector<double>> noise;
      for (std::size_t j = b0; j < b1; ++j) {
        batch.push_back(train[order[j]]);
        nn::Rng r(nn::mix_keys(nn::mix_keys(cfg.seed ^ 0x4e4f495345ULL, step), j - b0));
        std::vector<double> n(cfg.latent_dim);
        for (double& v : n) v = r.normal();
        noise.push_back(std::move(n));
      }
      auto grads = m.zero_gradients();
      const VaeLoss loss = vae_objective(m, batch, noise, &grads);
      if (!std::isfinite(loss.total)) fail(Errc::divergence, "VAE objective became non-finite at epoch " + std::to_string(epoch));
      nn::adam_step(params, grads, adam, adam_cfg);
      ++step;
      epoch_loss += loss.total * static_cast<double>(b1 - b0);
    }
    m.history.push_back(epoch_loss / static_cast<double>(train.size()));
    if (!val.empty()) {
      const double e = rmse(m, val);
      if (e < best_rmse) {
        best_rmse = e;
        best = m;
      }
    }
  }
  if (best) {
    best->history = m.history;
    m = std::move(*best);
    m.sigma = std::max(cfg.min_sigma, best_rmse);
  } else {
    std::vector<std::pair<std::vector<double>, Vec2>> fit;
    for (const auto& f : map.fingerprints)
      if (f.position) fit.emplace_back(normalized(f.rss), f.position->xy);
    m.sigma = std::max(cfg.min_sigma, rmse(m, fit));
  }
  return m;
}

/// Position through the latent mean (no sampling). Scans with no visible
/// dictionary AP are flagged low-confidence and get three times the sigma.
inline WifiFix vae_predict(const VaeModel& m, const WifiScan& scan, const std::vector<std::string>& dictionary) {
  if (dictionary != m.dictionary) fail(Errc::dictionary, "AP dictionary does not match the one the model was trained on");
  const std::vector<double> rss = dense_rss(scan, m.dictionary);
  WifiFix fix;
  fix.timestamp = scan.timestamp;
  fix.position = vae_position(m, normalized(rss));
  fix.floor = m.floor;
  fix.sigma = m.sigma;
  fix.low_confidence = std::all_of(rss.begin(), rss.end(), [](double v) { return v <= kRssFloor; });
  if (fix.low_confidence) fix.sigma *= 3.0;
  return fix;
}

// ---------------------------------------------------------------------------
// Persistence

/// CSV with header `t,x,y,floor,labeled,<ap ids...>`; unlabeled rows leave
/// x, y and floor empty.
inline std::string radiomap_to_csv(const RadioMap& map) {
  std::ostringstream out;
  out << "t,x,y,floor,labeled";
  for (const auto& ap : map.ap_dictionary) out << ',' << ap;
  out << '\n';
  for (const auto& f : map.fingerprints) {
    out << text::format_double(f.timestamp) << ',';
    if (f.position)
      out << text::format_double(f.position->xy.x) << ',' << text::format_double(f.position->xy.y) << ','
          << f.position->floor << ",1";
    else
      out << ",,,0";
    for (double v : f.rss) out << ',' << text::format_double(v);
    out << '\n';
  }
  return out.str();
}

inline RadioMap radiomap_from_csv(std::string_view content) {
  RadioMap map;
  std::size_t line_no = 0;
  for (std::string_view line : text::lines(content)) {
    ++line_no;
    line = text::trim(line);
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (line_no == 1) {
      if (f.size() < 5 || f[0] != "t" || f[4] != "labeled") fail(Errc::parse, "radiomap header must start with t,x,y,floor,labeled");
      for (std::size_t i = 5; i < f.size(); ++i) map.ap_dictionary.emplace_back(text::trim(f[i]));
      if (!std::is_sorted(map.ap_dictionary.begin(), map.ap_dictionary.end()) ||
          std::adjacent_find(map.ap_dictionary.begin(), map.ap_dictionary.end()) != map.ap_dictionary.end())
        fail(Errc::parse, "radiomap AP ids must be sorted and unique");
      continue;
    }
    if (f.size() != 5 + map.ap_dictionary.size())
      fail(Errc::parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(5 + map.ap_dictionary.size()) + " fields");
    Fingerprint fp;
    fp.timestamp = detail::parse_field(f[0], line_no, "t");
    if (text::trim(f[4]) == "1")
      fp.position = FloorPoint{Vec2{detail::parse_field(f[1], line_no, "x"), detail::parse_field(f[2], line_no, "y")},
                               static_cast<int>(std::lround(detail::parse_field(f[3], line_no, "floor")))};
    for (std::size_t i = 5; i < f.size(); ++i) fp.rss.push_back(detail::parse_field(f[i], line_no, "rss"));
    map.fingerprints.push_back(std::move(fp));
  }
  if (line_no == 0) fail(Errc::empty_map, "empty radiomap file");
  return map;
}

namespace detail {

inline nlohmann::json mlp_to_json(const nn::Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : l.params) params.push_back(p.storage());
    layers.push_back({{"spec", nn::layer_spec_to_json(l.spec)}, {"params", params}});
  }
  return layers;
}

inline void mlp_params_from_json(nn::Mlp& m, const nlohmann::json& j) {
  if (j.size() != m.layers.size()) fail(Errc::parse, "VAE layer count mismatch");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& ps = j.at(i).at("params");
    if (ps.size() != m.layers[i].params.size()) fail(Errc::parse, "VAE parameter count mismatch");
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto v = ps.at(k).get<std::vector<double>>();
      if (v.size() != m.layers[i].params[k].size()) fail(Errc::parse, "VAE parameter size mismatch");
      m.layers[i].params[k].storage() = std::move(v);
    }
  }
}

}  // namespace detail

inline nlohmann::json vae_config_to_json(const VaeConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"encoder", c.encoder},     {"decoder", c.decoder},
          {"regressor", c.regressor},   {"beta_recon", c.beta_recon}, {"beta_kl", c.beta_kl},
          {"lr", c.lr},                 {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"validation_fraction", c.validation_fraction},
          {"min_sigma", c.min_sigma},   {"seed", c.seed}};
}

inline VaeConfig vae_config_from_json(const nlohmann::json& j, VaeConfig c = {}) {
  try {
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.encoder = j.value("encoder", c.encoder);
    c.decoder = j.value("decoder", c.decoder);
    c.regressor = j.value("regressor", c.regressor);
    c.beta_recon = j.value("beta_recon", c.beta_recon);
    c.beta_kl = j.value("beta_kl", c.beta_kl);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.min_sigma = j.value("min_sigma", c.min_sigma);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad VAE configuration: ") + e.what());
  }
  return c;
}

inline std::string serialize_vae(const VaeModel& m) {
  const nlohmann::json j{{"config", vae_config_to_json(m.cfg)},
                         {"dictionary", m.dictionary},
                         {"center", {m.center.x, m.center.y}},
                         {"scale", m.scale},
                         {"sigma", m.sigma},
                         {"floor", m.floor},
                         {"encoder", detail::mlp_to_json(m.encoder)},
                         {"decoder", detail::mlp_to_json(m.decoder)},
                         {"regressor", detail::mlp_to_json(m.regressor)}};
  return j.dump();
}

inline VaeModel deserialize_vae(std::string_view text_in) {
  try {
    const auto j = nlohmann::json::parse(text_in);
    VaeModel m = make_vae(vae_config_from_json(j.at("config")), j.at("dictionary").get<std::vector<std::string>>());
    m.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
    m.scale = j.at("scale").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.floor = j.at("floor").get<int>();
    detail::mlp_params_from_json(m.encoder, j.at("encoder"));
    detail::mlp_params_from_json(m.decoder, j.at("decoder"));
    detail::mlp_params_from_json(m.regressor, j.at("regressor"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("bad VAE model file: ") + e.what());
  }
}

}  // namespace ipt
