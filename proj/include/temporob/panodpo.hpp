// Copyright 2026 The temporob Authors.
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


#pragma once

// Desk-scale panoramic preference optimization.
//
// The policy is a one-hidden-layer mean-pooled conditional model:
//
//   h_ctx   = mean embedding of the context (video tokens, then question)
//   h_t     = mean embedding of the answer prefix y_<t (zero at t = 0)
//   z_t     = tanh(Wc h_ctx + Wa h_t + bh)
//   logits  = Wo z_t + bo
//   log pi  = sum_t log_softmax(logits_t)[y_t]
//
// Gradients are derived by hand (reverse mode through the expression above)
// and checked against central finite differences in the test suite.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "temporob/error.hpp"
#include "temporob/io.hpp"
#include "temporob/prefdata.hpp"
#include "temporob/rng.hpp"

namespace temporob {

using TokenSeq = std::vector<int>;

// ---------------------------------------------------------------------------
// Vocabulary

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocab() {
    add("<pad>");
    add("<bos>");
    add("<eos>");
  }

  /// Specials followed by `tokens` in sorted order.
  static Vocab from_tokens(const std::set<std::string>& tokens) {
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  int add(const std::string& token) {
    const auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  int id(const std::string& token) const {
    const auto it = ids_.find(token);
    if (it == ids_.end()) throw VocabularyError("token '" + token + "' is not in the vocabulary");
    return it->second;
  }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  enum class Oov { error, skip };

  TokenSeq encode(std::span<const std::string> words, Oov policy = Oov::error) const {
    TokenSeq out;
    for (const auto& w : words) {
      if (policy == Oov::skip && !contains(w)) continue;
      out.push_back(id(w));
    }
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Lower-cased whitespace split; punctuation is trimmed from word edges but
/// bracketed tokens such as "<vid_3>" are kept whole.
inline std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  auto is_trim = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) && c != '<' && c != '>'; };
  for (std::string w; in >> w;) {
    std::size_t b = 0, e = w.size();
    while (b < e && is_trim(w[b])) ++b;
    while (e > b && is_trim(w[e - 1])) --e;
    if (e - b > 2 && w[b] == '<' && w[e - 1] == '>') {
      out.push_back(w.substr(b, e - b));
      continue;
    }
    while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
    if (b == e) continue;
    std::string t = w.substr(b, e - b);
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ToyPolicyParams {
  Matrix emb;  // |V| x d
  Matrix wc;   // m x d
  Matrix wa;   // m x d
  Matrix bh;   // m x 1
  Matrix wo;   // |V| x m
  Matrix bo;   // |V| x 1

  static ToyPolicyParams zeros(std::size_t vocab, std::size_t dim, std::size_t hidden) {
    return {Matrix(vocab, dim), Matrix(hidden, dim), Matrix(hidden, dim),
            Matrix(hidden, 1),  Matrix(vocab, hidden), Matrix(vocab, 1)};
  }

  /// Gaussian entries with standard deviation `scale`, drawn block by block.
  static ToyPolicyParams random(std::size_t vocab, std::size_t dim, std::size_t hidden,
                                std::uint64_t seed, double scale = 0.1) {
    ToyPolicyParams p = zeros(vocab, dim, hidden);
    Rng rng = Rng::stream(seed, "", "policy-init");
    for (auto& [name, m] : p.blocks())
      for (double& x : m->data) x = scale * rng.normal();
    return p;
  }

  std::size_t vocab_size() const noexcept { return emb.rows; }
  std::size_t dim() const noexcept { return emb.cols; }
  std::size_t hidden() const noexcept { return wc.rows; }

  std::array<std::pair<std::string_view, Matrix*>, 6> blocks() {
    return {{{"emb", &emb}, {"wc", &wc}, {"wa", &wa}, {"bh", &bh}, {"wo", &wo}, {"bo", &bo}}};
  }
  std::array<std::pair<std::string_view, const Matrix*>, 6> blocks() const {
    return {{{"emb", &emb}, {"wc", &wc}, {"wa", &wa}, {"bh", &bh}, {"wo", &wo}, {"bo", &bo}}};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : blocks()) n += m->data.size();
    return n;
  }

  void check_shapes() const {
    const std::size_t V = vocab_size(), d = dim(), m = hidden();
    const bool ok = wc.cols == d && wa.rows == m && wa.cols == d && bh.rows == m &&
                    bh.cols == 1 && wo.rows == V && wo.cols == m && bo.rows == V && bo.cols == 1 &&
                    V > 0;
    if (!ok) throw ValidationError("policy", "inconsistent parameter dimensions");
  }

  friend bool operator==(const ToyPolicyParams&, const ToyPolicyParams&) = default;
};

/// Same layout as the parameters.
using Gradients = ToyPolicyParams;

inline Gradients zeros_like(const ToyPolicyParams& p) {
  return ToyPolicyParams::zeros(p.vocab_size(), p.dim(), p.hidden());
}

/// Trainable policy and its frozen reference copy.
class PolicyPair {
 public:
  explicit PolicyPair(ToyPolicyParams init) : theta(init), ref_(std::move(init)) {}
  PolicyPair(ToyPolicyParams theta_, ToyPolicyParams ref)
      : theta(std::move(theta_)), ref_(std::move(ref)) {}

  ToyPolicyParams theta;
  const ToyPolicyParams& ref() const noexcept { return ref_; }

 private:
  ToyPolicyParams ref_;
};

// ---------------------------------------------------------------------------
// Likelihood

namespace detail {

inline void check_tokens(const ToyPolicyParams& p, std::span<const int> toks, const char* what) {
  for (int t : toks)
    if (t < 0 || static_cast<std::size_t>(t) >= p.vocab_size())
      throw VocabularyError(std::string(what) + " token id " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(p.vocab_size()));
}

/// log pi(answer | context); when `grad` is set, adds coef * d(log pi)/d(params).
inline double log_prob_impl(const ToyPolicyParams& p, std::span<const int> context,
                            std::span<const int> answer, Gradients* grad, double coef) {
  if (context.empty()) throw PreconditionError("log_prob: empty context");
  if (answer.empty()) throw PreconditionError("log_prob: empty answer");
  check_tokens(p, context, "context");
  check_tokens(p, answer, "answer");
  const std::size_t V = p.vocab_size(), d = p.dim(), m = p.hidden();

  std::vector<double> h_ctx(d, 0.0);
  for (int t : context)
    for (std::size_t k = 0; k < d; ++k) h_ctx[k] += p.emb(static_cast<std::size_t>(t), k);
  for (double& x : h_ctx) x /= static_cast<double>(context.size());

  std::vector<double> a_ctx(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = p.bh(i, 0);
    for (std::size_t k = 0; k < d; ++k) s += p.wc(i, k) * h_ctx[k];
    a_ctx[i] = s;
  }

  std::vector<double> prefix_sum(d, 0.0), h_t(d), z(m), logits(V), dlogits(V), dpre(m);
  std::vector<double> dh_ctx(d, 0.0), dh_t(d);
  double total = 0.0;
  for (std::size_t t = 0; t < answer.size(); ++t) {
    const double inv = t ? 1.0 / static_cast<double>(t) : 0.0;
    for (std::size_t k = 0; k < d; ++k) h_t[k] = prefix_sum[k] * inv;
    for (std::size_t i = 0; i < m; ++i) {
      double s = a_ctx[i];
      for (std::size_t k = 0; k < d; ++k) s += p.wa(i, k) * h_t[k];
      z[i] = std::tanh(s);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < V; ++v) {
      double s = p.bo(v, 0);
      for (std::size_t i = 0; i < m; ++i) s += p.wo(v, i) * z[i];
      logits[v] = s;
      mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) sum += std::exp(logits[v] - mx);
    const double lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(answer[t]);
    total += logits[y] - lse;

    if (grad) {
      Gradients& g = *grad;
      for (std::size_t v = 0; v < V; ++v)
        dlogits[v] = coef * ((v == y ? 1.0 : 0.0) - std::exp(logits[v] - lse));
      std::fill(dpre.begin(), dpre.end(), 0.0);
      for (std::size_t v = 0; v < V; ++v) {
        g.bo(v, 0) += dlogits[v];
        for (std::size_t i = 0; i < m; ++i) {
          g.wo(v, i) += dlogits[v] * z[i];
          dpre[i] += p.wo(v, i) * dlogits[v];
        }
      }
      for (std::size_t i = 0; i < m; ++i) dpre[i] *= 1.0 - z[i] * z[i];
      std::fill(dh_t.begin(), dh_t.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        g.bh(i, 0) += dpre[i];
        for (std::size_t k = 0; k < d; ++k) {
          g.wc(i, k) += dpre[i] * h_ctx[k];
          g.wa(i, k) += dpre[i] * h_t[k];
          dh_ctx[k] += p.wc(i, k) * dpre[i];
          dh_t[k] += p.wa(i, k) * dpre[i];
        }
      }
      for (std::size_t s = 0; s < t; ++s) {
        const auto row = static_cast<std::size_t>(answer[s]);
        for (std::size_t k = 0; k < d; ++k) g.emb(row, k) += dh_t[k] * inv;
      }
    }
    for (std::size_t k = 0; k < d; ++k) prefix_sum[k] += p.emb(y, k);
  }
  if (grad) {
    const double inv = 1.0 / static_cast<double>(context.size());
    for (int t : context)
      for (std::size_t k = 0; k < d; ++k)
        grad->emb(static_cast<std::size_t>(t), k) += dh_ctx[k] * inv;
  }
  return total;
}

}  // namespace detail

inline double log_prob(const ToyPolicyParams& params, std::span<const int> context,
                       std::span<const int> answer) {
  return detail::log_prob_impl(params, context, answer, nullptr, 0.0);
}

/// Adds coef * gradient of log_prob into `grad`; returns log_prob.
inline double log_prob_backward(const ToyPolicyParams& params, std::span<const int> context,
                                std::span<const int> answer, double coef, Gradients& grad) {
  return detail::log_prob_impl(params, context, answer, &grad, coef);
}

// ---------------------------------------------------------------------------
// Preference losses

/// -log sigmoid(z), evaluated as softplus(-z) without overflow.
inline double neg_log_sigmoid(double z) {
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

/// sigmoid(-z) = -d/dz neg_log_sigmoid(z).
inline double sigmoid_neg(double z) {
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

/// log-probabilities of one preferred/dispreferred side under both models.
struct SideLogProbs {
  double theta = 0.0;
  double ref = 0.0;
};

inline double preference_margin(SideLogProbs preferred, SideLogProbs dispreferred, double beta) {
  return beta * ((preferred.theta - preferred.ref) - (dispreferred.theta - dispreferred.ref));
}

/// Bradley-Terry preference loss -log sigmoid(z) for the given sides.
inline double preference_loss(SideLogProbs preferred, SideLogProbs dispreferred, double beta) {
  return neg_log_sigmoid(preference_margin(preferred, dispreferred, beta));
}

struct LossTerm {
  double loss = 0.0;
  double z = 0.0;
  bool degenerate = false;  // both sides had identical conditioning
};

/// One likelihood evaluation: context and answer token sequences.
struct Conditioned {
  TokenSeq context;
  TokenSeq answer;

  friend bool operator==(const Conditioned&, const Conditioned&) = default;
};

namespace detail {

inline TokenSeq concat(std::span<const int> a, std::span<const int> b) {
  TokenSeq out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + term);
}

inline LossTerm pairwise_term(const PolicyPair& pair, const Conditioned& preferred,
                              const Conditioned& dispreferred, double beta, const char* name,
                              Gradients* grad = nullptr, double scale = 1.0) {
  SideLogProbs w{log_prob(pair.theta, preferred.context, preferred.answer),
                 log_prob(pair.ref(), preferred.context, preferred.answer)};
  SideLogProbs l{log_prob(pair.theta, dispreferred.context, dispreferred.answer),
                 log_prob(pair.ref(), dispreferred.context, dispreferred.answer)};
  for (double v : {w.theta, w.ref, l.theta, l.ref}) check_finite(v, name);
  LossTerm term;
  term.z = preference_margin(w, l, beta);
  term.loss = neg_log_sigmoid(term.z);
  term.degenerate = preferred == dispreferred;
  check_finite(term.loss, name);
  if (grad) {
    // dL/dz = -sigmoid(-z); only the theta log-probs depend on parameters.
    const double dz = -sigmoid_neg(term.z) * beta * scale;
    log_prob_backward(pair.theta, preferred.context, preferred.answer, dz, *grad);
    log_prob_backward(pair.theta, dispreferred.context, dispreferred.answer, -dz, *grad);
  }
  return term;
}

}  // namespace detail

/// Response preference: y_w over y_l under the same (video, question).
inline LossTerm loss_dpo_m(const PolicyPair& pair, std::span<const int> question,
                           std::span<const int> video, std::span<const int> chosen,
                           std::span<const int> rejected, double beta) {
  const TokenSeq ctx = detail::concat(video, question);
  return detail::pairwise_term(pair, {ctx, TokenSeq(chosen.begin(), chosen.end())},
                               {ctx, TokenSeq(rejected.begin(), rejected.end())}, beta, "dpo_m");
}

/// Video preference: y_w under v_w over y_w under v_l.
inline LossTerm loss_dpo_v(const PolicyPair& pair, std::span<const int> question,
                           std::span<const int> video, std::span<const int> rejected_video,
                           std::span<const int> chosen, double beta) {
  const TokenSeq y(chosen.begin(), chosen.end());
  return detail::pairwise_term(pair, {detail::concat(video, question), y},
                               {detail::concat(rejected_video, question), y}, beta, "dpo_v");
}

/// Question preference with the perturbed question x_w + c on the preferred
/// side; `flipped` swaps the two sides.
inline LossTerm loss_dpo_t(const PolicyPair& pair, std::span<const int> question,
                           std::span<const int> perturbation, std::span<const int> video,
                           std::span<const int> chosen, double beta, bool flipped = false) {
  if (perturbation.empty()) throw PreconditionError("dpo_t: perturbation tokenizes to empty");
  const TokenSeq y(chosen.begin(), chosen.end());
  const TokenSeq clean_ctx = detail::concat(video, question);
  const TokenSeq perturbed_ctx = detail::concat(clean_ctx, perturbation);
  Conditioned perturbed{perturbed_ctx, y}, clean{clean_ctx, y};
  return flipped ? detail::pairwise_term(pair, clean, perturbed, beta, "dpo_t")
                 : detail::pairwise_term(pair, perturbed, clean, beta, "dpo_t");
}

/// One tokenized training example.
struct PanoExample {
  TokenSeq question;
  TokenSeq video;
  TokenSeq rejected_video;
  TokenSeq perturbation;
  TokenSeq chosen;
  TokenSeq rejected;

  void validate() const {
    if (question.empty() && video.empty()) throw ValidationError("example", "empty context");
    if (chosen.empty() || rejected.empty()) throw ValidationError("example", "empty answer");
    if (chosen == rejected) throw ValidationError("example", "chosen equals rejected");
  }
};

enum class LossKind { dpo, panodpo };

inline std::string_view to_string(LossKind k) { return k == LossKind::dpo ? "dpo" : "panodpo"; }

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "dpo") return LossKind::dpo;
  if (s == "panodpo") return LossKind::panodpo;
  throw ValidationError("loss", "unknown value '" + std::string(s) + "'");
}

struct LossOptions {
  LossKind kind = LossKind::panodpo;
  bool flip_dpo_t = false;
};

/// Batch means of each term. For the panoramic objective total is
/// dpo_m + dpo_v + dpo_t (added in that order); for vanilla DPO total is
/// dpo_m and the other two are diagnostics.
struct LossBreakdown {
  double dpo_m = 0.0;
  double dpo_v = 0.0;
  double dpo_t = 0.0;
  double total = 0.0;
  double beta = 0.1;
};

namespace detail {

inline LossBreakdown batch_loss(const PolicyPair& pair, std::span<const PanoExample> batch,
                                double beta, const LossOptions& opts, Gradients* grad) {
  if (batch.empty()) throw PreconditionError("empty batch");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw PreconditionError("beta must be finite and >= 0");
  const double scale = 1.0 / static_cast<double>(batch.size());
  const bool pano = opts.kind == LossKind::panodpo;
  LossBreakdown out;
  out.beta = beta;
  for (const auto& ex : batch) {
    ex.validate();
    const TokenSeq ctx = concat(ex.video, ex.question);
    const LossTerm m = pairwise_term(pair, {ctx, ex.chosen}, {ctx, ex.rejected}, beta, "dpo_m",
                                     grad, scale);
    double v_loss = 0.0, t_loss = 0.0;
    if (pano || !ex.rejected_video.empty()) {
      if (ex.rejected_video.empty()) throw ValidationError("example", "missing rejected video");
      v_loss = pairwise_term(pair, {ctx, ex.chosen}, {concat(ex.rejected_video, ex.question), ex.chosen},
                             beta, "dpo_v", pano ? grad : nullptr, scale)
                   .loss;
    }
    if (pano || !ex.perturbation.empty()) {
      if (ex.perturbation.empty()) throw PreconditionError("dpo_t: perturbation tokenizes to empty");
      Conditioned perturbed{concat(ctx, ex.perturbation), ex.chosen}, clean{ctx, ex.chosen};
      t_loss = (opts.flip_dpo_t
                    ? pairwise_term(pair, clean, perturbed, beta, "dpo_t", pano ? grad : nullptr, scale)
                    : pairwise_term(pair, perturbed, clean, beta, "dpo_t", pano ? grad : nullptr, scale))
                   .loss;
    }
    out.dpo_m += m.loss * scale;
    out.dpo_v += v_loss * scale;
    out.dpo_t += t_loss * scale;
  }
  out.total = pano ? out.dpo_m + out.dpo_v + out.dpo_t : out.dpo_m;
  return out;
}

}  // namespace detail

inline LossBreakdown loss_pano(const PolicyPair& pair, std::span<const PanoExample> batch, double beta,
                               const LossOptions& opts = {}) {
  return detail::batch_loss(pair, batch, beta, opts, nullptr);
}

/// Gradient of the batch-mean objective with respect to theta.
inline Gradients backward(const PolicyPair& pair, std::span<const PanoExample> batch, double beta,
                          const LossOptions& opts = {}, LossBreakdown* loss_out = nullptr) {
  Gradients g = zeros_like(pair.theta);
  const LossBreakdown loss = detail::batch_loss(pair, batch, beta, opts, &g);
  if (!std::isfinite(loss.total)) throw NumericError("non-finite loss");
  for (const auto& [name, m] : g.blocks())
    for (double x : m->data)
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in block " + std::string(name));
  if (loss_out) *loss_out = loss;
  return g;
}

// ---------------------------------------------------------------------------
// Training

enum class Schedule { cosine, constant };

struct TrainConfig {
  double beta = 0.1;
  int epochs = 3;
  std::size_t batch = 64;
  double lr = 1e-5;
  Schedule schedule = Schedule::cosine;
  double warmup_ratio = 0.1;
  LossOptions loss{};
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(beta > 0.0)) throw PreconditionError("beta must be positive");
    if (epochs < 0) throw PreconditionError("epochs must be >= 0");
    if (batch < 1) throw PreconditionError("batch must be >= 1");
    if (!(lr >= 0.0)) throw PreconditionError("lr must be >= 0");
    if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0))
      throw PreconditionError("warmup_ratio must be in [0, 1]");
  }
};

/// Linear warm-up over ceil(ratio * total) steps, then cosine decay to 0.
inline double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(
      std::ceil(cfg.warmup_ratio * static_cast<double>(total_steps)));
  if (step < warmup)
    return cfg.lr * static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, warmup));
  if (cfg.schedule == Schedule::constant) return cfg.lr;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(std::max<std::size_t>(1, total_steps - warmup));
  return cfg.lr * std::max(0.0, 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

/// Mean of log pi(y_w | x, v) - log pi(y_l | x, v).
inline double mean_likelihood_gap(const ToyPolicyParams& p, std::span<const PanoExample> data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : data) {
    const TokenSeq ctx = detail::concat(ex.video, ex.question);
    sum += log_prob(p, ctx, ex.chosen) - log_prob(p, ctx, ex.rejected);
  }
  return sum / static_cast<double>(data.size());
}

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  double mean_gap = 0.0;
  std::optional<double> heldout_gap;
};

struct TrainResult {
  ToyPolicyParams theta;
  std::vector<EpochRecord> history;  // epoch 0 is the initialization
  std::size_t steps = 0;
};

class AdamState {
 public:
  explicit AdamState(const ToyPolicyParams& like) : m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(ToyPolicyParams& p, const Gradients& g, double lr, const TrainConfig& cfg) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t_));
    auto pb = p.blocks();
    const auto gb = g.blocks();
    auto mb = m_.blocks();
    auto vb = v_.blocks();
    for (std::size_t b = 0; b < pb.size(); ++b) {
      auto& pd = pb[b].second->data;
      const auto& gd = gb[b].second->data;
      auto& md = mb[b].second->data;
      auto& vd = vb[b].second->data;
      for (std::size_t i = 0; i < pd.size(); ++i) {
        md[i] = cfg.adam_beta1 * md[i] + (1.0 - cfg.adam_beta1) * gd[i];
        vd[i] = cfg.adam_beta2 * vd[i] + (1.0 - cfg.adam_beta2) * gd[i] * gd[i];
        pd[i] -= lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + cfg.adam_eps);
      }
    }
  }

 private:
  Gradients m_;
  Gradients v_;
  std::uint64_t t_ = 0;
};

/// Adam over all parameters with a warm-up + cosine learning rate. Batches
/// are drawn from a per-epoch seeded shuffle, so runs are reproducible.
inline TrainResult train(const PolicyPair& pair, std::span<const PanoExample> data,
                         const TrainConfig& cfg, std::span<const PanoExample> heldout = {}) {
  cfg.validate();
  if (data.empty()) throw EmptyDatasetError();
  PolicyPair work(pair.theta, pair.ref());
  TrainResult res;
  const std::size_t steps_per_epoch = (data.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);

  auto gaps = [&](EpochRecord& rec) {
    rec.mean_gap = mean_likelihood_gap(work.theta, data);
    if (!heldout.empty()) rec.heldout_gap = mean_likelihood_gap(work.theta, heldout);
  };
  EpochRecord init;
  init.loss = loss_pano(work, data, cfg.beta, cfg.loss);
  gaps(init);
  res.history.push_back(init);

  AdamState adam(work.theta);
  std::vector<std::size_t> order(data.size());
  std::vector<PanoExample> batch;
  std::size_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::stream(cfg.seed, "epoch-" + std::to_string(epoch), "batch-order");
    rng.shuffle(std::span<std::size_t>(order));
    LossBreakdown sum{0.0, 0.0, 0.0, 0.0, cfg.beta};
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      batch.clear();
      for (std::size_t i = s * cfg.batch; i < std::min(data.size(), (s + 1) * cfg.batch); ++i)
        batch.push_back(data[order[i]]);
      LossBreakdown loss;
      Gradients g;
      try {
        g = backward(work, batch, cfg.beta, cfg.loss, &loss);
      } catch (const NumericError& e) {
        throw NumericError("diverged at step " + std::to_string(step) + ": " + e.what());
      }
      adam.step(work.theta, g, learning_rate_at(cfg, step, total_steps), cfg);
      sum.dpo_m += loss.dpo_m;
      sum.dpo_v += loss.dpo_v;
      sum.dpo_t += loss.dpo_t;
      sum.total += loss.total;
    }
    const double n = static_cast<double>(steps_per_epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = {sum.dpo_m / n, sum.dpo_v / n, sum.dpo_t / n, sum.total / n, cfg.beta};
    gaps(rec);
    res.history.push_back(rec);
  }
  res.theta = std::move(work.theta);
  res.steps = step;
  return res;
}

inline std::string history_to_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,dpo_m,dpo_v,dpo_t,total,mean_gap\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.loss.dpo_m,
                  r.loss.dpo_v, r.loss.dpo_t, r.loss.total, r.mean_gap);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: 8-byte magic "TRBCKPT1", u64 little-endian header length, a JSON
// header, then every section as little-endian IEEE-754 doubles in header
// order. The header names each section with its shape and byte offset
// relative to the end of the header.

inline constexpr std::string_view kCheckpointMagic = "TRBCKPT1";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ToyPolicyParams& p, const Vocab& vocab,
                                        const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json sections = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, m] : p.blocks()) {
    sections.push_back({{"name", name}, {"rows", m->rows}, {"cols", m->cols}, {"offset", offset}});
    offset += m->data.size() * 8;
  }
  const nlohmann::json header = {{"format", "temporob-toy-policy"},
                                 {"version", kCheckpointVersion},
                                 {"dims", {{"vocab", p.vocab_size()}, {"dim", p.dim()}, {"hidden", p.hidden()}}},
                                 {"vocab", vocab.tokens()},
                                 {"sections", sections},
                                 {"meta", meta}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic);
  detail::put_u64(out, h.size());
  out += h;
  for (const auto& [name, m] : p.blocks())
    for (double x : m->data) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

struct Checkpoint {
  ToyPolicyParams params;
  Vocab vocab;
  nlohmann::json meta;
};

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic)
    throw ParseError(1, 0, "checkpoint: bad magic");
  const std::uint64_t hlen = detail::get_u64(bytes, 8);
  if (bytes.size() < 16 + hlen) throw ParseError(1, 8, "checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, 16 + e.byte, e.what());
  }
  if (header.value("version", 0) != kCheckpointVersion)
    throw ParseError(1, 16, "checkpoint: unsupported version");
  Checkpoint ck;
  const auto& dims = header.at("dims");
  ck.params = ToyPolicyParams::zeros(dims.at("vocab").get<std::size_t>(), dims.at("dim").get<std::size_t>(),
                                     dims.at("hidden").get<std::size_t>());
  Vocab v;
  const auto toks = header.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (v.add(toks[i]) != static_cast<int>(i)) throw ParseError(1, 16, "checkpoint: vocab mismatch");
  ck.vocab = std::move(v);
  ck.meta = header.value("meta", nlohmann::json::object());
  const std::size_t base = 16 + hlen;
  std::map<std::string, nlohmann::json> by_name;
  for (const auto& s : header.at("sections")) by_name[s.at("name").get<std::string>()] = s;
  for (auto& [name, m] : ck.params.blocks()) {
    const auto it = by_name.find(std::string(name));
    if (it == by_name.end()) throw ParseError(1, 16, "checkpoint: missing section " + std::string(name));
    if (it->second.at("rows").get<std::size_t>() != m->rows || it->second.at("cols").get<std::size_t>() != m->cols)
      throw ParseError(1, 16, "checkpoint: shape mismatch in " + std::string(name));
    const std::size_t off = base + it->second.at("offset").get<std::size_t>();
    if (bytes.size() < off + m->data.size() * 8)
      throw ParseError(1, off, "checkpoint: truncated section " + std::string(name));
    for (std::size_t i = 0; i < m->data.size(); ++i)
      m->data[i] = std::bit_cast<double>(detail::get_u64(bytes, off + 8 * i));
  }
  if (ck.vocab.size() != ck.params.vocab_size()) throw ParseError(1, 16, "checkpoint: vocab size mismatch");
  return ck;
}

// ---------------------------------------------------------------------------
// Dataset preparation

/// Tokens of every text field, sorted, for building a vocabulary.
inline std::set<std::string> corpus_tokens(std::span<const PreferenceTuple> tuples,
                                           const std::function<std::vector<std::string>(const std::string&)>& video_tokens = {}) {
  std::set<std::string> toks;
  auto add = [&](const std::vector<std::string>& ws) { toks.insert(ws.begin(), ws.end()); };
  for (const auto& t : tuples) {
    add(tokenize_text(t.question));
    add(tokenize_text(t.chosen));
    add(tokenize_text(t.rejected));
    if (t.perturbation) add(tokenize_text(*t.perturbation));
    add(t.video_tokens);
    add(t.rejected_video_tokens);
    if (video_tokens) {
      if (t.video_tokens.empty() && !t.video_path.empty()) add(video_tokens(t.video_path));
      if (t.rejected_video_tokens.empty() && t.rejected_video_path) add(video_tokens(*t.rejected_video_path));
    }
  }
  return toks;
}

/// Tokenizes one tuple. Video tokens come from the inline token lists or,
/// failing that, from `video_tokens(path)`.
inline PanoExample to_example(const PreferenceTuple& t, const Vocab& vocab,
                              const std::function<std::vector<std::string>(const std::string&)>& video_tokens = {}) {
  PanoExample ex;
  auto enc = [&](const std::vector<std::string>& ws) { return vocab.encode(ws); };
  ex.question = enc(tokenize_text(t.question));
  ex.chosen = enc(tokenize_text(t.chosen));
  ex.rejected = enc(tokenize_text(t.rejected));
  if (t.perturbation) ex.perturbation = enc(tokenize_text(*t.perturbation));
  if (!t.video_tokens.empty()) {
    ex.video = enc(t.video_tokens);
  } else if (video_tokens && !t.video_path.empty()) {
    ex.video = enc(video_tokens(t.video_path));
  }
  if (!t.rejected_video_tokens.empty()) {
    ex.rejected_video = enc(t.rejected_video_tokens);
  } else if (video_tokens && t.rejected_video_path) {
    ex.rejected_video = enc(video_tokens(*t.rejected_video_path));
  }
  return ex;
}

/// Model size used by the command-line trainer.
struct ToyModelConfig {
  std::size_t dim = 8;
  std::size_t hidden = 8;
  double init_scale = 0.1;
};

struct PreparedData {
  Vocab vocab;
  std::vector<PanoExample> train;
  std::vector<PanoExample> heldout;
};

/// Builds one vocabulary over both splits and tokenizes them.
inline PreparedData prepare_examples(std::span<const PreferenceTuple> train,
                                     std::span<const PreferenceTuple> heldout = {}) {
  std::set<std::string> toks = corpus_tokens(train);
  toks.merge(corpus_tokens(heldout));
  PreparedData out{Vocab::from_tokens(toks), {}, {}};
  for (const auto& t : train) out.train.push_back(to_example(t, out.vocab));
  for (const auto& t : heldout) out.heldout.push_back(to_example(t, out.vocab));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic preference data
//
// Each tuple draws a topic t and a decoy topic d != t from kSyntheticTopics.
//   video          <vid_t> plus two noise tokens <vn_j>
//   rejected video the same with <vid_t> replaced by <vid_d>
//   question       "what happens in <ctx_s> scene <w_j>"
//   perturbation   "note the scene is <ctx_d>"
//   chosen         <ans_t> <tail_j>
//   rejected       <ans_d> <tail_j>
// In the "train" split the scene cue s is the topic t, so both the video and
// the question predict the chosen answer. Every other split is a shortcut
// split: s is the decoy d, the text points at the rejected answer and only
// the video points at the chosen one. A policy that learns the video-answer
// association raises the held-out chosen-minus-rejected likelihood gap; one
// that leans on the question cue lowers it.

inline constexpr std::size_t kSyntheticTopics = 8;
inline constexpr std::size_t kSyntheticNoise = 8;

inline std::vector<PreferenceTuple> synthetic_preferences(std::size_t count, std::uint64_t seed,
                                                          std::string_view split = "train") {
  std::vector<PreferenceTuple> out;
  out.reserve(count);
  Rng rng = Rng::stream(seed, split, "synthetic-preferences");
  const bool shortcut = split != "train";
  auto tok = [](const char* stem, std::size_t i) { return "<" + std::string(stem) + std::to_string(i) + ">"; };
  for (std::size_t i = 0; i < count; ++i) {
    const auto t = static_cast<std::size_t>(rng.below(kSyntheticTopics));
    auto d = static_cast<std::size_t>(rng.below(kSyntheticTopics - 1));
    if (d >= t) ++d;
    const auto n1 = static_cast<std::size_t>(rng.below(kSyntheticNoise));
    const auto n2 = static_cast<std::size_t>(rng.below(kSyntheticNoise));
    const auto w = static_cast<std::size_t>(rng.below(kSyntheticNoise));
    const auto tail = static_cast<std::size_t>(rng.below(kSyntheticNoise));
    PreferenceTuple p;
    p.tuple_id = std::string(split) + "-" + std::to_string(i);
    p.video_tokens = {tok("vid_", t), tok("vn_", n1), tok("vn_", n2)};
    p.rejected_video_tokens = {tok("vid_", d), tok("vn_", n1), tok("vn_", n2)};
    p.question = "what happens in " + tok("ctx_", shortcut ? d : t) + " scene " + tok("w_", w);
    p.perturbation = "note the scene is " + tok("ctx_", d);
    p.chosen = tok("ans_", t) + " " + tok("tail_", tail);
    p.rejected = tok("ans_", d) + " " + tok("tail_", tail);
    p.video_mode = "synthetic";
    p.seed = seed;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace temporob
