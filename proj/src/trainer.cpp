#include "ocam/trainer.hpp"

#include <cmath>
#include <string>

#include "ocam/error.hpp"

namespace ocam {

namespace {

// Row bookkeeping shared by the samplers.
struct ClassView {
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> pos_in_class;  // row -> index inside its class
  std::vector<std::size_t> eligible_rows;  // rows whose class has >= 2
  std::size_t present_classes = 0;

  explicit ClassView(const Dataset& ds) {
    const std::size_t j = ds.num_classes();
    counts.assign(j, 0);
    members.assign(j, {});
    pos_in_class.assign(ds.size(), 0);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const auto c = static_cast<std::size_t>(ds.labels[r]);
      pos_in_class[r] = members[c].size();
      members[c].push_back(r);
      ++counts[c];
    }
    for (std::size_t c = 0; c < j; ++c)
      if (counts[c] > 0) ++present_classes;
    for (std::size_t r = 0; r < ds.size(); ++r)
      if (counts[static_cast<std::size_t>(ds.labels[r])] >= 2)
        eligible_rows.push_back(r);
  }

  void require_triplet_ready() const {
    if (present_classes < 2)
      throw UsageError("sampling: dataset has a single class");
    if (eligible_rows.empty())
      throw UsageError("sampling: no class has >= 2 samples");
  }

  std::size_t draw_same_class_other(std::size_t row, Rng& rng,
                                    const Dataset& ds) const {
    const auto c = static_cast<std::size_t>(ds.labels[row]);
    std::size_t m = static_cast<std::size_t>(rng.uniform_int(counts[c] - 1));
    if (m >= pos_in_class[row]) ++m;  // skip the row itself
    return members[c][m];
  }

  std::size_t draw_other_class(std::size_t row, Rng& rng,
                               const Dataset& ds) const {
    const auto c = static_cast<std::size_t>(ds.labels[row]);
    const std::size_t total = ds.size() - counts[c];
    std::size_t m = static_cast<std::size_t>(rng.uniform_int(total));
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k == c) continue;
      if (m < counts[k]) return members[k][m];
      m -= counts[k];
    }
    throw DomainError("sampling: negative draw out of range");  // unreachable
  }
};

// The cosine distance is undefined at the origin; a sub-tolerance nudge
// keeps the loss defined without disturbing anything else.
void guard_zero_norm(Vec& e) {
  double s = 0.0;
  for (const double v : e) s += v * v;
  if (s == 0.0 && !e.empty()) e[0] = 1e-8;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  validate(cfg.loss);
  if (cfg.steps == 0) throw UsageError("train: steps must be > 0");
  if (cfg.batch_size == 0) throw UsageError("train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw UsageError("train: learning_rate must be > 0");
  if (!(cfg.adam_beta1 >= 0.0) || !(cfg.adam_beta1 < 1.0))
    throw UsageError("train: adam_beta1 must be in [0, 1)");
  if (!(cfg.adam_beta2 >= 0.0) || !(cfg.adam_beta2 < 1.0))
    throw UsageError("train: adam_beta2 must be in [0, 1)");
  if (!(cfg.adam_epsilon > 0.0))
    throw UsageError("train: adam_epsilon must be > 0");
  if (!(cfg.dropout_rate >= 0.0) || !(cfg.dropout_rate < 1.0))
    throw UsageError("train: dropout_rate must be in [0, 1)");
  if (cfg.embedding_dim == 0)
    throw UsageError("train: embedding_dim must be >= 1");
  for (const std::size_t h : cfg.hidden)
    if (h == 0) throw UsageError("train: zero hidden width");
  if (cfg.loss.kind == LossKind::triep &&
      (cfg.triep_classes < 2 || cfg.triep_per_class < 2))
    throw UsageError("train: mined batches need >= 2 classes and >= 2 per class");
}

TripletBatch sample_triplets(const Dataset& ds, std::size_t batch_size,
                             Rng& rng) {
  if (batch_size == 0) throw UsageError("sample_triplets: empty batch");
  const ClassView view(ds);
  view.require_triplet_ready();
  TripletBatch batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t anchor = view.eligible_rows[static_cast<std::size_t>(
        rng.uniform_int(view.eligible_rows.size()))];
    const std::size_t positive = view.draw_same_class_other(anchor, rng, ds);
    const std::size_t negative = view.draw_other_class(anchor, rng, ds);
    batch.push_back({anchor, positive, negative});
  }
  return batch;
}

std::vector<IndexPair> sample_pairs(const Dataset& ds, std::size_t batch_size,
                                    Rng& rng) {
  if (batch_size == 0) throw UsageError("sample_pairs: empty batch");
  const ClassView view(ds);
  view.require_triplet_ready();
  std::vector<IndexPair> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    if (i % 2 == 0) {
      const std::size_t a = view.eligible_rows[static_cast<std::size_t>(
          rng.uniform_int(view.eligible_rows.size()))];
      batch.push_back({a, view.draw_same_class_other(a, rng, ds), true});
    } else {
      const auto a = static_cast<std::size_t>(rng.uniform_int(ds.size()));
      batch.push_back({a, view.draw_other_class(a, rng, ds), false});
    }
  }
  return batch;
}

GroupedIndexBatch sample_grouped(const Dataset& ds, std::size_t classes,
                                 std::size_t per_class, Rng& rng) {
  if (classes < 2 || per_class < 2)
    throw UsageError("sample_grouped: need >= 2 classes and >= 2 per class");
  const ClassView view(ds);
  std::vector<std::size_t> eligible_classes;
  for (std::size_t c = 0; c < view.counts.size(); ++c)
    if (view.counts[c] >= 2) eligible_classes.push_back(c);
  if (eligible_classes.size() < 2)
    throw UsageError(
        "sample_grouped: mined batches need two classes with >= 2 samples");
  rng.shuffle(eligible_classes);
  const std::size_t take_classes = std::min(classes, eligible_classes.size());
  GroupedIndexBatch batch;
  for (std::size_t k = 0; k < take_classes; ++k) {
    std::vector<std::size_t> rows = view.members[eligible_classes[k]];
    rng.shuffle(rows);
    const std::size_t take = std::min(per_class, rows.size());
    batch.rows.insert(batch.rows.end(), rows.begin(), rows.begin() + take);
  }
  return batch;
}

AdamState zero_state_like(const ModelParams& m) {
  AdamState st;
  for (const Layer& l : m.layers) {
    st.m_weights.emplace_back(l.weights.size(), 0.0);
    st.v_weights.emplace_back(l.weights.size(), 0.0);
    st.m_biases.emplace_back(l.biases.size(), 0.0);
    st.v_biases.emplace_back(l.biases.size(), 0.0);
  }
  return st;
}

void adam_update(Vec& param, const Vec& grad, Vec& m, Vec& v,
                 std::uint64_t step, double lr, double beta1, double beta2,
                 double epsilon) {
  if (param.size() != grad.size() || m.size() != grad.size() ||
      v.size() != grad.size())
    throw UsageError("adam_update: block shape mismatch");
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g))
      throw DomainError("adam_update: non-finite gradient at element " +
                        std::to_string(i));
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (grads.d_weights.size() != params.layers.size())
    throw UsageError("adam_step: gradient shape mismatch");
  ++state.step;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_update(params.layers[l].weights, grads.d_weights[l],
                state.m_weights[l], state.v_weights[l], state.step,
                cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_epsilon);
    adam_update(params.layers[l].biases, grads.d_biases[l], state.m_biases[l],
                state.v_biases[l], state.step, cfg.learning_rate,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  }
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  validate(cfg);
  validate(ds);
  const LossKind kind = cfg.loss.kind;
  const bool cosine = cfg.loss.metric == Metric::cosine;

  TrainResult out;
  out.model = init_model(ds.dim(), cfg.hidden, cfg.embedding_dim,
                         derive_seed(cfg.seed, "init"), cfg.activation,
                         cfg.dropout_rate);
  AdamState state = zero_state_like(out.model);

  // Classification head used only by the cross-entropy kind; discarded
  // after training so the returned embedder matches every other kind.
  ModelParams head;
  AdamState head_state;
  if (kind == LossKind::cross_entropy) {
    if (ds.num_classes() < 2)
      throw UsageError("train: cross-entropy needs at least 2 classes");
    head = init_model(cfg.embedding_dim, {}, ds.num_classes(),
                      derive_seed(cfg.seed, "head"));
    head_state = zero_state_like(head);
  }

  Rng rng(derive_seed(cfg.seed, "train"));
  out.history.reserve(cfg.steps);

  ForwardTrace ta, tp, tn;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ModelGrads grads = zero_grads_like(out.model);
    double mean_loss = 0.0;

    if (kind == LossKind::contrastive) {
      const auto batch = sample_pairs(ds, cfg.batch_size, rng);
      const double coef = 1.0 / static_cast<double>(batch.size());
      double sum = 0.0;
      Vec d1, d2;
      for (const IndexPair& p : batch) {
        forward_trace(out.model, ds.features[p.first], true, &rng, ta);
        forward_trace(out.model, ds.features[p.second], true, &rng, tp);
        Vec e1 = ta.output, e2 = tp.output;
        if (cosine) {
          guard_zero_norm(e1);
          guard_zero_norm(e2);
        }
        sum += contrastive_loss(e1, e2, p.same_class, cfg.loss.alpha,
                                cfg.loss.metric, &d1, &d2);
        backward(out.model, ta, d1, coef, grads);
        backward(out.model, tp, d2, coef, grads);
      }
      mean_loss = sum * coef;
    } else if (kind == LossKind::cross_entropy) {
      // Three samples per nominal triplet keep the images-seen-per-step
      // budget aligned with the triplet kinds.
      const std::size_t n = cfg.batch_size * 3;
      const double coef = 1.0 / static_cast<double>(n);
      double sum = 0.0;
      Vec d_logits, d_emb;
      ModelGrads head_grads = zero_grads_like(head);
      ForwardTrace th;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(rng.uniform_int(ds.size()));
        forward_trace(out.model, ds.features[row], true, &rng, ta);
        forward_trace(head, ta.output, false, nullptr, th);
        sum += softmax_cross_entropy(
            th.output, static_cast<std::size_t>(ds.labels[row]), &d_logits);
        backward(head, th, d_logits, coef, head_grads, &d_emb);
        // d_emb carries the coef scale already; pass it through unscaled.
        backward(out.model, ta, d_emb, 1.0, grads);
      }
      mean_loss = sum * coef;
      if (!std::isfinite(mean_loss))
        throw DomainError("train: non-finite loss at step " +
                          std::to_string(step));
      adam_step(out.model, grads, state, cfg);
      adam_step(head, head_grads, head_state, cfg);
      out.history.push_back(mean_loss);
      continue;
    } else if (kind == LossKind::triep) {
      const GroupedIndexBatch group =
          sample_grouped(ds, cfg.triep_classes, cfg.triep_per_class, rng);
      GroupedBatch gb;
      std::vector<ForwardTrace> traces(group.rows.size());
      for (std::size_t i = 0; i < group.rows.size(); ++i) {
        forward_trace(out.model, ds.features[group.rows[i]], true, &rng,
                      traces[i]);
        Vec e = traces[i].output;
        if (cosine) guard_zero_norm(e);
        gb.embeddings.push_back(std::move(e));
        gb.labels.push_back(ds.labels[group.rows[i]]);
      }
      std::vector<Vec> gvec;
      mean_loss = triep_loss(gb, cfg.loss, &gvec);
      for (std::size_t i = 0; i < group.rows.size(); ++i)
        backward(out.model, traces[i], gvec[i], 1.0, grads);
    } else {
      const TripletBatch batch = sample_triplets(ds, cfg.batch_size, rng);
      const double coef = 1.0 / static_cast<double>(batch.size());
      double sum = 0.0;
      Triplet t;
      TripletGrad tg;
      for (const IndexTriplet& idx : batch) {
        forward_trace(out.model, ds.features[idx.anchor], true, &rng, ta);
        forward_trace(out.model, ds.features[idx.positive], true, &rng, tp);
        forward_trace(out.model, ds.features[idx.negative], true, &rng, tn);
        t.anchor = ta.output;
        t.positive = tp.output;
        t.negative = tn.output;
        if (cosine) {
          guard_zero_norm(t.anchor);
          guard_zero_norm(t.positive);
          guard_zero_norm(t.negative);
        }
        sum += triplet_kind_loss(cfg.loss, t, &tg);
        backward(out.model, ta, tg.d_anchor, coef, grads);
        backward(out.model, tp, tg.d_positive, coef, grads);
        backward(out.model, tn, tg.d_negative, coef, grads);
      }
      mean_loss = sum * coef;
    }

    if (!std::isfinite(mean_loss))
      throw DomainError("train: non-finite loss at step " +
                        std::to_string(step));
    adam_step(out.model, grads, state, cfg);
    out.history.push_back(mean_loss);
  }
  return out;
}

}  // namespace ocam
