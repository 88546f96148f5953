#pragma once

// Zero-shot classification: every candidate label becomes a hypothesis, each
// (text, hypothesis) pair is scored by an entailment backend, and the
// entailment scores are turned into class probabilities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "backend.hpp"
#include "core.hpp"
#include "verbalizer.hpp"

namespace entail {

struct ClassificationRequest {
  std::vector<std::string> texts;
  std::vector<std::string> candidate_labels;
  std::string hypothesis_template = "This text is about {}";
  bool multi_label = false;
};

// Single-label: softmax of the entailment logits across classes.
inline std::vector<double> softmax_entailment(std::span<const PairScore> scores) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores) m = std::max(m, s.entailment_logit);
  std::vector<double> p;
  p.reserve(scores.size());
  double total = 0.0;
  for (const auto& s : scores) total += p.emplace_back(std::exp(s.entailment_logit - m));
  for (auto& v : p) v /= total;
  return p;
}

// Multi-label: each pair on its own, exp(e) / (exp(e) + exp(ne)).
inline double pairwise_entailment_prob(const PairScore& s) {
  return 1.0 / (1.0 + std::exp(s.not_entailment_logit - s.entailment_logit));
}

// Probabilities are stored by candidate-label position; see ranked() for the
// presentation order.
inline std::vector<Prediction> classify(const ClassificationRequest& req, ScoringBackend& backend,
                                        std::size_t batch_size_override = 0) {
  if (req.texts.empty()) throw UsageError("classify: no texts");
  if (req.candidate_labels.empty()) throw UsageError("classify: no candidate labels");

  std::vector<std::string> hypotheses;
  for (const auto& label : req.candidate_labels) hypotheses.push_back(render_template(req.hypothesis_template, label));

  const auto k = hypotheses.size();
  std::vector<TextPair> pairs;
  pairs.reserve(req.texts.size() * k);
  for (const auto& text : req.texts)
    for (const auto& h : hypotheses) pairs.push_back({text, h});

  const auto scores = score_pairs(backend, pairs, batch_size_override);

  std::vector<Prediction> out;
  out.reserve(req.texts.size());
  for (std::size_t t = 0; t < req.texts.size(); ++t) {
    const std::span<const PairScore> row(scores.data() + t * k, k);
    Prediction pred;
    pred.text_id = static_cast<long>(t);
    if (req.multi_label) {
      for (const auto& s : row) pred.class_probs.push_back(pairwise_entailment_prob(s));
    } else {
      pred.class_probs = softmax_entailment(row);
    }
    pred.predicted_class = argmax(pred.class_probs);
    out.push_back(std::move(pred));
  }
  return out;
}

// Candidate positions sorted by descending probability (lower index first on
// ties).
inline std::vector<std::size_t> ranked(const Prediction& p) {
  std::vector<std::size_t> order(p.class_probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return p.class_probs[a] > p.class_probs[b]; });
  return order;
}

// Pipeline-style record: {"sequence", "labels", "scores"} in ranked order.
inline ordered_json prediction_to_json(const Prediction& p, const std::string& text,
                                       const std::vector<std::string>& labels) {
  ordered_json j;
  j["sequence"] = text;
  j["labels"] = ordered_json::array();
  j["scores"] = ordered_json::array();
  for (auto i : ranked(p)) {
    j["labels"].push_back(labels.at(i));
    j["scores"].push_back(p.class_probs[i]);
  }
  j["predicted"] = labels.at(static_cast<std::size_t>(p.predicted_class));
  return j;
}

}  // namespace entail
