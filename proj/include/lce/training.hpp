#ifndef LCE_TRAINING_HPP
#define LCE_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/inverted_index.hpp"
#include "lce/random.hpp"
#include "lce/reranker.hpp"

namespace lce {

// ---- losses -----------------------------------------------------------------

struct LossAndGradient {
  double loss = 0.0;
  double dloss_ds = 0.0;
};

/// Binary cross-entropy on the logit `s`; the gradient is sigmoid(s) - label.
inline LossAndGradient vanilla_bce_loss(double s, int label) {
  if (!std::isfinite(s)) throw Error("non-finite score in BCE loss");
  if (label != 0 && label != 1) throw Error("BCE label must be 0 or 1");
  // log(1 + e^-|s|) + max(s, 0) - s * label
  const double loss = std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - s * label;
  const double sigmoid = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
  return {loss, sigmoid - label};
}

struct GroupLoss {
  double loss = 0.0;
  std::vector<double> dloss_dscores;
};

/// Softmax cross-entropy of the positive within its group:
/// -log(exp(s+) / sum_i exp(s_i)), gradient softmax(s) - onehot(positive).
inline GroupLoss lce_group_loss(std::span<const double> scores, std::size_t positive_index) {
  if (scores.size() < 2) throw Error("LCE group needs at least two scores");
  if (positive_index >= scores.size()) throw Error("positive index out of range");
  for (auto s : scores)
    if (!std::isfinite(s)) throw Error("non-finite score in LCE loss");

  // Pivot on the maximum (the positive when it ties for max) so the loss is
  // (max - s+) + log1p(rest) and stays accurate when the positive dominates.
  std::size_t pivot = positive_index;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > scores[pivot]) pivot = i;
  const double top = scores[pivot];
  double rest = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != pivot) rest += std::exp(scores[i] - top);
  const double log_norm = std::log1p(rest);  // log sum exp(s - top)

  GroupLoss out;
  out.loss = (top - scores[positive_index]) + log_norm;
  out.dloss_dscores.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.dloss_dscores[i] = std::exp(scores[i] - top - log_norm) - (i == positive_index ? 1.0 : 0.0);
  return out;
}

/// Mean of per-query group losses over the batch.
inline double lce_batch_loss(std::span<const double> group_losses) {
  if (group_losses.empty()) throw Error("empty LCE batch");
  double sum = 0.0;
  for (auto l : group_losses) sum += l;
  return sum / static_cast<double>(group_losses.size());
}

// ---- localized negative sampling ----------------------------------------

struct SamplerConfig {
  std::size_t m = 100;          // pool depth in the train retriever's ranking
  std::size_t group_size = 8;   // 1 positive + group_size - 1 negatives
  std::uint64_t seed = 0;
  bool resample_each_epoch = true;

  std::size_t negatives() const { return group_size - 1; }

  void validate() const {
    if (m == 0) throw Error("sampler pool depth m must be positive");
    if (group_size < 2) throw Error("group size must be at least 2");
    if (group_size - 1 > m) throw Error("group size - 1 exceeds pool depth m");
  }
};

struct TrainingGroup {
  std::string query_id;
  std::string positive;
  std::vector<std::string> negatives;

  bool operator==(const TrainingGroup&) const = default;
};

enum class SkipReason { no_relevant, too_few_negatives };

struct SampleOutcome {
  std::optional<TrainingGroup> group;
  std::optional<SkipReason> skipped;
};

/// Non-relevant documents among the top m of a ranking, in rank order.
inline std::vector<std::string> negative_pool(const Ranking& ranking, const QrelSet& qrels, std::size_t m) {
  std::vector<std::string> pool;
  const auto depth = std::min(m, ranking.docs.size());
  for (std::size_t i = 0; i < depth; ++i)
    if (!qrels.relevant(ranking.query_id, ranking.docs[i].doc_id)) pool.push_back(ranking.docs[i].doc_id);
  return pool;
}

/// Draws group_size - 1 distinct non-relevant documents uniformly from the top m
/// of the ranking and pairs them with the query's lowest-doc_id relevant
/// document. Negatives are returned in rank order.
inline SampleOutcome sample_negatives(const Ranking& ranking, const QrelSet& qrels, const SamplerConfig& config,
                                      Rng& rng) {
  config.validate();
  const auto relevant = qrels.relevant_docs(ranking.query_id);
  if (relevant.empty()) return {std::nullopt, SkipReason::no_relevant};
  const auto pool = negative_pool(ranking, qrels, config.m);
  const auto need = config.negatives();
  if (pool.size() < need) return {std::nullopt, SkipReason::too_few_negatives};

  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < need; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(need);
  std::sort(idx.begin(), idx.end());

  TrainingGroup g{ranking.query_id, relevant.front(), {}};
  for (auto i : idx) g.negatives.push_back(pool[i]);
  return {std::move(g), std::nullopt};
}

struct EpochGroups {
  std::vector<TrainingGroup> groups;
  std::size_t skipped = 0;
};

/// One sampling pass over all rankings, in input order.
inline EpochGroups sample_groups(std::span<const Ranking> rankings, const QrelSet& qrels, const SamplerConfig& config,
                                 Rng& rng) {
  EpochGroups out;
  for (const auto& r : rankings) {
    auto s = sample_negatives(r, qrels, config, rng);
    if (s.group)
      out.groups.push_back(std::move(*s.group));
    else
      ++out.skipped;
  }
  return out;
}

// ---- training loop --------------------------------------------------------

enum class Objective { vanilla, lce };

inline std::string_view to_string(Objective o) { return o == Objective::vanilla ? "vanilla" : "lce"; }

inline Objective parse_objective(std::string_view name) {
  if (name == "vanilla") return Objective::vanilla;
  if (name == "lce") return Objective::lce;
  throw Error("unknown objective: " + std::string(name));
}

struct TrainConfig {
  Objective objective = Objective::lce;
  std::size_t epochs = 2;
  double learning_rate = 1e-3;
  double warmup_portion = 0.1;
  std::size_t batch_queries = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t hidden = kDefaultHidden;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw Error("learning rate must be positive");
    if (!(warmup_portion >= 0 && warmup_portion < 1)) throw Error("warmup portion must lie in [0, 1)");
    if (batch_queries == 0) throw Error("batch size must be positive");
    if (hidden == 0) throw Error("hidden size must be positive");
  }
};

/// Linear warmup from zero over the first `warmup_steps`, then linear decay to zero.
inline double scheduled_learning_rate(double peak, std::size_t step, std::size_t total_steps,
                                      std::size_t warmup_steps) {
  if (step < warmup_steps) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
}

class Adam {
 public:
  Adam(std::size_t n, double beta1, double beta2, double epsilon)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(ScorerParams& params, ScorerGradients& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t k = 0;
    for_each_trainable(params, grads, [&](double& p, double g) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g * g;
      p -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + epsilon_);
      ++k;
    });
  }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
};

struct TrainingLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::size_t skipped_queries = 0;
};

struct TrainingLog {
  std::vector<TrainingLogRow> rows;
  std::vector<EpochGroups> epochs;  // sampled groups, identical for both objectives under one seed

  std::string to_csv() const {
    std::string out = "step,epoch,lr,loss,skipped_queries\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%zu\n", r.step, r.epoch, r.lr, r.loss, r.skipped_queries);
      out += buf;
    }
    return out;
  }
};

struct TrainResult {
  ScorerParams params;
  TrainingLog log;
};

namespace detail {

/// Feature vectors for the documents a query can contribute to training.
using FeatureCache = std::unordered_map<std::string, std::unordered_map<std::string, FeatureVector>>;

}  // namespace detail

/// Trains a scorer on groups sampled from the train retriever's rankings.
/// The master seed of `train_config` drives initialization and batch order;
/// `sampler.seed` drives negative sampling, so both objectives see the same
/// groups for the same sampler seed.
inline TrainResult train(const InvertedIndex& index, std::span<const Ranking> rankings, const QrelSet& qrels,
                         std::span<const Query> queries, const TrainConfig& config, const SamplerConfig& sampler) {
  config.validate();
  sampler.validate();

  std::unordered_map<std::string, const Query*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);
  std::vector<Ranking> usable;
  for (const auto& r : rankings) {
    if (!by_id.contains(r.query_id)) throw Error("ranking for unknown query " + r.query_id);
    usable.push_back(r);
  }

  // Feature cache over every document a sampled group can contain.
  detail::FeatureCache cache;
  std::vector<FeatureVector> stats_sample;
  for (const auto& r : usable) {
    const auto relevant = qrels.relevant_docs(r.query_id);
    const auto pool = negative_pool(r, qrels, sampler.m);
    if (relevant.empty() || pool.size() < sampler.negatives()) continue;
    const auto tokens = index.analyze_query(by_id.at(r.query_id)->text);
    auto& qc = cache[r.query_id];
    auto add = [&](const std::string& doc_id) {
      const auto ord = index.ordinal_of(doc_id);
      if (!ord) throw Error("document " + doc_id + " missing from index");
      auto f = extract_features(index, tokens, *ord);
      qc.emplace(doc_id, f);
      stats_sample.push_back(f);
    };
    add(relevant.front());
    for (const auto& d : pool) add(d);
  }
  if (cache.empty()) throw Error("no trainable queries after skipping");

  TrainResult result;
  result.params = init_params(config.seed, config.hidden, kFeatureCount, compute_feature_stats(stats_sample));
  if (config.epochs == 0) return result;

  Rng order_rng(derive_seed(config.seed, 1));
  auto& params = result.params;
  Adam adam(trainable_count(params), config.adam_beta1, config.adam_beta2, config.adam_epsilon);

  const std::size_t n_groups = cache.size();
  const std::size_t steps_per_epoch = (n_groups + config.batch_queries - 1) / config.batch_queries;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const auto warmup_steps = static_cast<std::size_t>(config.warmup_portion * static_cast<double>(total_steps));
  std::size_t step = 0;

  EpochGroups current;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch == 0 || sampler.resample_each_epoch) {
      Rng sample_rng(derive_seed(sampler.seed, epoch));
      current = sample_groups(usable, qrels, sampler, sample_rng);
    }
    result.log.epochs.push_back(current);
    const auto& groups = current.groups;

    auto features_of = [&](const std::string& qid, const std::string& doc) -> const FeatureVector& {
      return cache.at(qid).at(doc);
    };

    if (config.objective == Objective::lce) {
      std::vector<std::size_t> order(groups.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle(std::span<std::size_t>(order), order_rng);
      for (std::size_t start = 0; start < order.size(); start += config.batch_queries) {
        const auto end = std::min(order.size(), start + config.batch_queries);
        auto grads = ScorerGradients::zeros_like(params);
        std::vector<double> losses;
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k) {
          const auto& g = groups[order[k]];
          std::vector<const FeatureVector*> feats{&features_of(g.query_id, g.positive)};
          for (const auto& d : g.negatives) feats.push_back(&features_of(g.query_id, d));
          std::vector<double> scores;
          for (const auto* f : feats) scores.push_back(score(params, *f));
          const auto gl = lce_group_loss(scores, 0);
          losses.push_back(gl.loss);
          for (std::size_t i = 0; i < feats.size(); ++i)
            accumulate_backward(params, *feats[i], gl.dloss_dscores[i] * inv, grads);
        }
        const double lr = scheduled_learning_rate(config.learning_rate, step, total_steps, warmup_steps);
        adam.step(params, grads, lr);
        result.log.rows.push_back({step, epoch, lr, lce_batch_loss(losses), current.skipped});
        ++step;
      }
    } else {
      struct Pair {
        const FeatureVector* features;
        int label;
      };
      std::vector<Pair> pairs;
      for (const auto& g : groups) {
        pairs.push_back({&features_of(g.query_id, g.positive), 1});
        for (const auto& d : g.negatives) pairs.push_back({&features_of(g.query_id, d), 0});
      }
      shuffle(std::span<Pair>(pairs), order_rng);
      const std::size_t batch_pairs = config.batch_queries * sampler.group_size;
      for (std::size_t start = 0; start < pairs.size(); start += batch_pairs) {
        const auto end = std::min(pairs.size(), start + batch_pairs);
        auto grads = ScorerGradients::zeros_like(params);
        const double inv = 1.0 / static_cast<double>(end - start);
        double loss_sum = 0.0;
        for (std::size_t k = start; k < end; ++k) {
          const auto lg = vanilla_bce_loss(score(params, *pairs[k].features), pairs[k].label);
          loss_sum += lg.loss;
          accumulate_backward(params, *pairs[k].features, lg.dloss_ds * inv, grads);
        }
        const double lr = scheduled_learning_rate(config.learning_rate, step, total_steps, warmup_steps);
        adam.step(params, grads, lr);
        result.log.rows.push_back({step, epoch, lr, loss_sum * inv, current.skipped});
        ++step;
      }
    }
  }
  return result;
}

}  // namespace lce

#endif
