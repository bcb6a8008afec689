#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ocam/metric.hpp"

namespace ocam {

enum class LossKind {
  ocam,                // adaptive margin from the positive-negative distance
  ocam_no_pn,          // ablation: fixed A-N weighting, adaptive margin kept
  ocam_fixed_margin,   // ablation: averaged distances, constant margin alpha
  triplet,             // classic hinge with constant margin
  contrastive,         // pairwise attract / repel
  cross_entropy,       // classification head
  triep,               // mined hardest pairs with distance weights
  wabt,                // anchor scaled by a constant factor
  dmtri,               // ratio form, margin in the denominator
  condtri,             // hinge plus distance-sum regularizer
  ctll,                // hinge plus anchor-positive norm regularizer
};

inline constexpr int kNumLossKinds = 11;

const char* to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view s);

// Default margin per kind, following each method's source setting. Kinds
// without a margin get 0.
double default_alpha(LossKind k);

// Hyperparameters for every kind. Fields irrelevant to a given kind are
// ignored by it.
struct LossSpec {
  LossKind kind = LossKind::ocam;
  Metric metric = Metric::cosine;
  double alpha = 0.0;
  double sigma1 = 2.04;       // triep positive-side weights
  double sigma2 = 1.71;
  double beta1 = 0.83;        // triep negative-side weights
  double beta2 = 0.64;
  double anchor_scale = 3.0;  // wabt anchor multiplier
  double delta = 0.1;         // condtri regularizer weight
  double kappa = 0.01;        // ctll regularizer weight
  double gamma = 0.01;        // ctll constant offset
  double prob_floor = 1e-12;  // cross-entropy probability clamp
};

// Spec with the kind's default alpha filled in.
LossSpec make_loss_spec(LossKind kind, Metric metric = Metric::cosine);

// Throws UsageError on out-of-domain hyperparameters.
void validate(const LossSpec& spec);

struct Triplet {
  Vec anchor;
  Vec positive;
  Vec negative;
};

struct TripletGrad {
  Vec d_anchor;
  Vec d_positive;
  Vec d_negative;
};

// max(0, f(A,P) - (f(A,N) + 2 f(P,N) - 1) / 2) where f is the metric
// distance. With the cosine distance the subtracted term reads as the
// averaged opposing distance plus an adaptive margin (1 - f(P,N)) / 2:
// the closer the positive sits to the negative, the wider the margin.
double ocam_loss(const Triplet& t, Metric metric = Metric::cosine,
                 TripletGrad* grad = nullptr);

enum class OcamAblation { no_pn, fixed_margin, both };

// no_pn keeps the adaptive margin but drops the averaged negative
// distance; fixed_margin keeps the average but replaces the adaptive
// margin with a constant; both reduces to the classic triplet loss and
// delegates to it outright.
double ocam_ablation_loss(const Triplet& t, OcamAblation variant,
                          double alpha_fixed = 0.2,
                          Metric metric = Metric::cosine,
                          TripletGrad* grad = nullptr);

double triplet_loss(const Triplet& t, double alpha,
                    Metric metric = Metric::cosine,
                    TripletGrad* grad = nullptr);

// same_class: 0.5 f^2, else 0.5 max(0, alpha - f)^2.
double contrastive_loss(std::span<const double> e1, std::span<const double> e2,
                        bool same_class, double alpha,
                        Metric metric = Metric::cosine, Vec* d_e1 = nullptr,
                        Vec* d_e2 = nullptr);

// -log(p[true_class]) with p clamped from below by prob_floor.
double cross_entropy_loss(std::span<const double> probs,
                          std::size_t true_class, double prob_floor = 1e-12);

// Numerically stable cross-entropy on raw scores. d_logits, when
// requested, is softmax(logits) minus the one-hot target: the training
// path for the classification head.
double softmax_cross_entropy(std::span<const double> logits,
                             std::size_t true_class, Vec* d_logits = nullptr);

// Dispatch for every triplet-shaped kind (everything except contrastive,
// cross_entropy and triep). Gradients of the hinge at the kink use
// subgradient zero.
double triplet_kind_loss(const LossSpec& spec, const Triplet& t,
                         TripletGrad* grad = nullptr);

// Batch for mined losses: flat embedding list with parallel labels,
// grouped by the sampler as classes-times-samples.
struct GroupedBatch {
  std::vector<Vec> embeddings;
  std::vector<std::int32_t> labels;
};

// Hardest-pair mined loss: per eligible anchor, the farthest same-class
// and the nearest other-class embedding enter a weighted hinge
// max(0, s1 s2 max_f(A,P) - b1 b2 min_f(A,N) + alpha); the batch value is
// the mean over eligible anchors. grads, when requested, is resized to
// one slot per batch embedding.
double triep_loss(const GroupedBatch& batch, const LossSpec& spec,
                  std::vector<Vec>* grads = nullptr);

}  // namespace ocam
