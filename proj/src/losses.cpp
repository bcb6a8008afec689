#include "ocam/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ocam/error.hpp"

namespace ocam {

namespace {

void axpy(Vec& dst, double a, const Vec& x) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * x[i];
}

void init_grad(TripletGrad& g, std::size_t n) {
  g.d_anchor.assign(n, 0.0);
  g.d_positive.assign(n, 0.0);
  g.d_negative.assign(n, 0.0);
}

std::size_t require_triplet_dims(const Triplet& t) {
  const std::size_t n = t.anchor.size();
  if (t.positive.size() != n || t.negative.size() != n)
    throw UsageError("triplet: embedding length mismatch");
  if (n == 0) throw UsageError("triplet: empty embeddings");
  return n;
}

}  // namespace

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::ocam: return "ocam";
    case LossKind::ocam_no_pn: return "ocam-no-pn";
    case LossKind::ocam_fixed_margin: return "ocam-fixed-margin";
    case LossKind::triplet: return "triplet";
    case LossKind::contrastive: return "contrastive";
    case LossKind::cross_entropy: return "cross-entropy";
    case LossKind::triep: return "triep";
    case LossKind::wabt: return "wabt";
    case LossKind::dmtri: return "dmtri";
    case LossKind::condtri: return "condtri";
    case LossKind::ctll: return "ctll";
  }
  throw UsageError("unknown loss kind value");
}

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "ocam") return LossKind::ocam;
  if (s == "ocam-no-pn") return LossKind::ocam_no_pn;
  if (s == "ocam-fixed-margin") return LossKind::ocam_fixed_margin;
  if (s == "triplet") return LossKind::triplet;
  if (s == "contrastive") return LossKind::contrastive;
  if (s == "cross-entropy") return LossKind::cross_entropy;
  if (s == "triep") return LossKind::triep;
  if (s == "wabt") return LossKind::wabt;
  if (s == "dmtri") return LossKind::dmtri;
  if (s == "condtri") return LossKind::condtri;
  if (s == "ctll") return LossKind::ctll;
  throw UsageError("unknown loss kind: '" + std::string(s) + "'");
}

double default_alpha(LossKind k) {
  switch (k) {
    case LossKind::ocam:
    case LossKind::ocam_no_pn:
    case LossKind::cross_entropy:
      return 0.0;  // no margin in these kinds
    case LossKind::ocam_fixed_margin:
    case LossKind::triplet:
    case LossKind::contrastive:
    case LossKind::dmtri:
    case LossKind::condtri:
      return 0.2;
    case LossKind::triep:
      return 0.3;
    case LossKind::wabt:
    case LossKind::ctll:
      return 1.0;
  }
  throw UsageError("unknown loss kind value");
}

LossSpec make_loss_spec(LossKind kind, Metric metric) {
  LossSpec spec;
  spec.kind = kind;
  spec.metric = metric;
  spec.alpha = default_alpha(kind);
  return spec;
}

void validate(const LossSpec& spec) {
  const char* name = to_string(spec.kind);
  auto fail = [&](const std::string& what) {
    throw UsageError(std::string(name) + ": " + what);
  };
  switch (spec.kind) {
    case LossKind::ocam:
    case LossKind::ocam_no_pn:
      break;  // no tunables
    case LossKind::dmtri:
      // alpha sits in a denominator; zero would divide by the
      // anchor-positive distance alone.
      if (!(spec.alpha > 0.0)) fail("alpha must be > 0");
      break;
    case LossKind::ocam_fixed_margin:
    case LossKind::triplet:
    case LossKind::contrastive:
      if (!(spec.alpha >= 0.0)) fail("alpha must be >= 0");
      break;
    case LossKind::triep:
      if (!(spec.alpha >= 0.0)) fail("alpha must be >= 0");
      if (!(spec.sigma1 > 0.0) || !(spec.sigma2 > 0.0) ||
          !(spec.beta1 > 0.0) || !(spec.beta2 > 0.0))
        fail("distance weights must be > 0");
      break;
    case LossKind::wabt:
      if (!(spec.alpha >= 0.0)) fail("alpha must be >= 0");
      if (!(spec.anchor_scale > 0.0)) fail("anchor_scale must be > 0");
      break;
    case LossKind::condtri:
      if (!(spec.alpha >= 0.0)) fail("alpha must be >= 0");
      if (!(spec.delta >= 0.0)) fail("delta must be >= 0");
      break;
    case LossKind::ctll:
      if (!(spec.alpha >= 0.0)) fail("alpha must be >= 0");
      if (!(spec.kappa >= 0.0)) fail("kappa must be >= 0");
      if (!(spec.gamma >= 0.0)) fail("gamma must be >= 0");
      break;
    case LossKind::cross_entropy:
      if (!(spec.prob_floor > 0.0) || !(spec.prob_floor < 1.0))
        fail("prob_floor must be in (0, 1)");
      break;
  }
}

double ocam_loss(const Triplet& t, Metric metric, TripletGrad* grad) {
  LossSpec spec = make_loss_spec(LossKind::ocam, metric);
  return triplet_kind_loss(spec, t, grad);
}

double ocam_ablation_loss(const Triplet& t, OcamAblation variant,
                          double alpha_fixed, Metric metric,
                          TripletGrad* grad) {
  // "both" strips the averaged distance and the adaptive margin, which is
  // exactly the classic formulation; delegate so the two share one code
  // path and stay bitwise equal.
  if (variant == OcamAblation::both)
    return triplet_loss(t, alpha_fixed, metric, grad);
  LossSpec spec = make_loss_spec(variant == OcamAblation::no_pn
                                     ? LossKind::ocam_no_pn
                                     : LossKind::ocam_fixed_margin,
                                 metric);
  spec.alpha = alpha_fixed;
  return triplet_kind_loss(spec, t, grad);
}

double triplet_loss(const Triplet& t, double alpha, Metric metric,
                    TripletGrad* grad) {
  LossSpec spec = make_loss_spec(LossKind::triplet, metric);
  spec.alpha = alpha;
  return triplet_kind_loss(spec, t, grad);
}

double contrastive_loss(std::span<const double> e1, std::span<const double> e2,
                        bool same_class, double alpha, Metric metric,
                        Vec* d_e1, Vec* d_e2) {
  const PairDistanceGrad g = distance_grad(metric, e1, e2);
  double loss = 0.0;
  double coef = 0.0;  // dL/df
  if (same_class) {
    loss = 0.5 * g.value * g.value;
    coef = g.value;
  } else {
    const double gap = alpha - g.value;
    if (gap > 0.0) {
      loss = 0.5 * gap * gap;
      coef = -gap;
    }
  }
  if (d_e1) {
    d_e1->assign(e1.size(), 0.0);
    axpy(*d_e1, coef, g.d_lhs);
  }
  if (d_e2) {
    d_e2->assign(e2.size(), 0.0);
    axpy(*d_e2, coef, g.d_rhs);
  }
  return loss;
}

double cross_entropy_loss(std::span<const double> probs,
                          std::size_t true_class, double prob_floor) {
  if (probs.empty()) throw UsageError("cross_entropy_loss: empty probs");
  if (true_class >= probs.size())
    throw UsageError("cross_entropy_loss: true_class out of range");
  if (!(prob_floor > 0.0) || !(prob_floor < 1.0))
    throw UsageError("cross_entropy_loss: prob_floor must be in (0, 1)");
  return -std::log(std::max(probs[true_class], prob_floor));
}

double softmax_cross_entropy(std::span<const double> logits,
                             std::size_t true_class, Vec* d_logits) {
  if (logits.empty()) throw UsageError("softmax_cross_entropy: empty logits");
  if (true_class >= logits.size())
    throw UsageError("softmax_cross_entropy: true_class out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (const double z : logits) sum += std::exp(z - m);
  const double loss = std::log(sum) - (logits[true_class] - m);
  if (d_logits) {
    d_logits->assign(logits.size(), 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i)
      (*d_logits)[i] = std::exp(logits[i] - m) / sum;
    (*d_logits)[true_class] -= 1.0;
  }
  return loss;
}

double triplet_kind_loss(const LossSpec& spec, const Triplet& t,
                         TripletGrad* grad) {
  validate(spec);
  const std::size_t n = require_triplet_dims(t);
  if (grad) init_grad(*grad, n);

  const Metric metric = spec.metric;

  switch (spec.kind) {
    case LossKind::ocam: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const PairDistanceGrad pn = distance_grad(metric, t.positive, t.negative);
      const double pre = ap.value - (an.value + 2.0 * pn.value - 1.0) / 2.0;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        axpy(grad->d_anchor, 1.0, ap.d_lhs);
        axpy(grad->d_anchor, -0.5, an.d_lhs);
        axpy(grad->d_positive, 1.0, ap.d_rhs);
        axpy(grad->d_positive, -1.0, pn.d_lhs);
        axpy(grad->d_negative, -0.5, an.d_rhs);
        axpy(grad->d_negative, -1.0, pn.d_rhs);
      }
      return pre;
    }
    case LossKind::ocam_no_pn: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const PairDistanceGrad pn = distance_grad(metric, t.positive, t.negative);
      const double pre = ap.value - an.value + (1.0 - pn.value) / 2.0;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        axpy(grad->d_anchor, 1.0, ap.d_lhs);
        axpy(grad->d_anchor, -1.0, an.d_lhs);
        axpy(grad->d_positive, 1.0, ap.d_rhs);
        axpy(grad->d_positive, -0.5, pn.d_lhs);
        axpy(grad->d_negative, -1.0, an.d_rhs);
        axpy(grad->d_negative, -0.5, pn.d_rhs);
      }
      return pre;
    }
    case LossKind::ocam_fixed_margin: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const PairDistanceGrad pn = distance_grad(metric, t.positive, t.negative);
      const double pre =
          ap.value - (an.value + pn.value) / 2.0 + spec.alpha;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        axpy(grad->d_anchor, 1.0, ap.d_lhs);
        axpy(grad->d_anchor, -0.5, an.d_lhs);
        axpy(grad->d_positive, 1.0, ap.d_rhs);
        axpy(grad->d_positive, -0.5, pn.d_lhs);
        axpy(grad->d_negative, -0.5, an.d_rhs);
        axpy(grad->d_negative, -0.5, pn.d_rhs);
      }
      return pre;
    }
    case LossKind::triplet: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const double pre = ap.value - an.value + spec.alpha;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        axpy(grad->d_anchor, 1.0, ap.d_lhs);
        axpy(grad->d_anchor, -1.0, an.d_lhs);
        axpy(grad->d_positive, 1.0, ap.d_rhs);
        axpy(grad->d_negative, -1.0, an.d_rhs);
      }
      return pre;
    }
    case LossKind::wabt: {
      // Distances are taken from the scaled anchor r*A; the chain rule
      // puts the factor r back onto the anchor gradient.
      const double r = spec.anchor_scale;
      Vec scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = r * t.anchor[i];
      const PairDistanceGrad ap = distance_grad(metric, scaled, t.positive);
      const PairDistanceGrad an = distance_grad(metric, scaled, t.negative);
      const double pre = ap.value - an.value + spec.alpha;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        axpy(grad->d_anchor, r, ap.d_lhs);
        axpy(grad->d_anchor, -r, an.d_lhs);
        axpy(grad->d_positive, 1.0, ap.d_rhs);
        axpy(grad->d_negative, -1.0, an.d_rhs);
      }
      return pre;
    }
    case LossKind::dmtri: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const double denom = ap.value + spec.alpha;
      const double pre = 1.0 - an.value / denom;
      if (pre <= 0.0) return 0.0;
      if (grad) {
        const double c_ap = an.value / (denom * denom);
        const double c_an = -1.0 / denom;
        axpy(grad->d_anchor, c_ap, ap.d_lhs);
        axpy(grad->d_anchor, c_an, an.d_lhs);
        axpy(grad->d_positive, c_ap, ap.d_rhs);
        axpy(grad->d_negative, c_an, an.d_rhs);
      }
      return pre;
    }
    case LossKind::condtri: {
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const double pre = ap.value - an.value + spec.alpha;
      const double reg = spec.delta * (ap.value + an.value) / 2.0;
      const double hinge = pre > 0.0 ? pre : 0.0;
      if (grad) {
        const double h = pre > 0.0 ? 1.0 : 0.0;
        const double c_ap = h + spec.delta / 2.0;
        const double c_an = -h + spec.delta / 2.0;
        axpy(grad->d_anchor, c_ap, ap.d_lhs);
        axpy(grad->d_anchor, c_an, an.d_lhs);
        axpy(grad->d_positive, c_ap, ap.d_rhs);
        axpy(grad->d_negative, c_an, an.d_rhs);
      }
      return hinge + reg;
    }
    case LossKind::ctll: {
      // The regularizer is the raw anchor-positive L2 norm, independent
      // of the metric chosen for the hinge.
      const PairDistanceGrad ap = distance_grad(metric, t.anchor, t.positive);
      const PairDistanceGrad an = distance_grad(metric, t.anchor, t.negative);
      const PairDistanceGrad nrm =
          euclidean_distance_grad(t.anchor, t.positive);
      const double pre = ap.value - an.value + spec.alpha;
      const double hinge = pre > 0.0 ? pre : 0.0;
      if (grad) {
        const double h = pre > 0.0 ? 1.0 : 0.0;
        axpy(grad->d_anchor, h, ap.d_lhs);
        axpy(grad->d_anchor, -h, an.d_lhs);
        axpy(grad->d_positive, h, ap.d_rhs);
        axpy(grad->d_negative, -h, an.d_rhs);
        axpy(grad->d_anchor, spec.kappa, nrm.d_lhs);
        axpy(grad->d_positive, spec.kappa, nrm.d_rhs);
      }
      return hinge + spec.kappa * nrm.value - spec.gamma;
    }
    case LossKind::contrastive:
    case LossKind::cross_entropy:
    case LossKind::triep:
      throw UsageError(std::string(to_string(spec.kind)) +
                       " is not a per-triplet loss");
  }
  throw UsageError("unknown loss kind value");
}

double triep_loss(const GroupedBatch& batch, const LossSpec& spec,
                  std::vector<Vec>* grads) {
  validate(spec);
  const std::size_t n = batch.embeddings.size();
  if (n != batch.labels.size())
    throw UsageError("triep_loss: embeddings/labels size mismatch");
  if (n < 3) throw UsageError("triep_loss: batch needs at least 3 embeddings");
  const std::size_t dim = batch.embeddings[0].size();
  for (const Vec& e : batch.embeddings)
    if (e.size() != dim) throw UsageError("triep_loss: ragged embeddings");
  bool multi_class = false;
  for (std::size_t i = 1; i < n && !multi_class; ++i)
    multi_class = batch.labels[i] != batch.labels[0];
  if (!multi_class)
    throw UsageError("triep_loss: batch needs at least two classes");

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double d =
          distance(spec.metric, batch.embeddings[i], batch.embeddings[j]);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }

  if (grads) grads->assign(n, Vec(dim, 0.0));

  const double wp = spec.sigma1 * spec.sigma2;
  const double wn = spec.beta1 * spec.beta2;
  struct Mined {
    std::size_t anchor, pos, neg;
  };
  std::vector<Mined> active;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t a = 0; a < n; ++a) {
    // Ties keep the earliest index so mining is order-deterministic.
    std::ptrdiff_t best_p = -1, best_n = -1;
    double fp = -1.0;
    double fn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = dist[a * n + j];
      if (batch.labels[j] == batch.labels[a]) {
        if (d > fp) {
          fp = d;
          best_p = static_cast<std::ptrdiff_t>(j);
        }
      } else if (d < fn) {
        fn = d;
        best_n = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (best_p < 0 || best_n < 0) continue;  // singleton class: not an anchor
    ++used;
    const double pre = wp * fp - wn * fn + spec.alpha;
    if (pre > 0.0) {
      total += pre;
      if (grads)
        active.push_back({a, static_cast<std::size_t>(best_p),
                          static_cast<std::size_t>(best_n)});
    }
  }
  if (used == 0)
    throw UsageError("triep_loss: no anchor has both partners in batch");
  const double inv = 1.0 / static_cast<double>(used);
  if (grads) {
    for (const Mined& m : active) {
      const PairDistanceGrad gp = distance_grad(
          spec.metric, batch.embeddings[m.anchor], batch.embeddings[m.pos]);
      const PairDistanceGrad gn = distance_grad(
          spec.metric, batch.embeddings[m.anchor], batch.embeddings[m.neg]);
      axpy((*grads)[m.anchor], inv * wp, gp.d_lhs);
      axpy((*grads)[m.pos], inv * wp, gp.d_rhs);
      axpy((*grads)[m.anchor], -inv * wn, gn.d_lhs);
      axpy((*grads)[m.neg], -inv * wn, gn.d_rhs);
    }
  }
  return total * inv;
}

}  // namespace ocam
