#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sts/classifier.hpp"
#include "sts/client.hpp"
#include "sts/pipeline.hpp"
#include "sts/synth_cohort.hpp"
#include "sts/wire.hpp"

namespace sts {

enum class LabelSource { Label, User };

struct EvalOptions {
  KnnOptions knn;
  ChannelMode channels = ChannelMode::Raw;
  double grid_rate = 0.0;  ///< 0 uses each packet's nominal rate
  LabelSource label_by = LabelSource::Label;
};

inline LabeledSeries to_labeled(const TrialPacket& p, std::string label, const EvalOptions& opt) {
  const double rate = opt.grid_rate > 0.0 ? opt.grid_rate : static_cast<double>(p.nominal_rate);
  return {p.trial_id, std::move(label), make_features(resample_uniform(p, rate), opt.channels)};
}

struct EvalItem {
  std::string trial_id;
  std::string true_label;
  std::string predicted_label;
  std::string nearest_id;
  double nearest_distance = 0.0;
  std::optional<double> margin;
};

struct EvalReport {
  std::size_t k = 1;
  double band_fraction = 0.1;
  std::vector<std::string> labels;
  std::vector<std::vector<int>> confusion;  ///< rows true, columns predicted
  std::vector<EvalItem> items;
  std::size_t correct = 0;
  double accuracy = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& it : items)
      trials.push_back({{"trial_id", it.trial_id},
                        {"true_label", it.true_label},
                        {"predicted_label", it.predicted_label},
                        {"nearest_id", it.nearest_id},
                        {"nearest_distance", it.nearest_distance},
                        {"margin", it.margin ? nlohmann::json(*it.margin) : nlohmann::json(nullptr)}});
    return {{"accuracy", accuracy}, {"correct", correct},   {"total", items.size()},
            {"k", k},               {"band_fraction", band_fraction}, {"labels", labels},
            {"confusion", confusion}, {"trials", std::move(trials)}};
  }

  std::string to_text() const {
    std::size_t w = 9;
    for (const auto& l : labels) w = std::max(w, l.size() + 2);
    auto pad = [&](const std::string& s) { return s + std::string(w > s.size() ? w - s.size() : 1, ' '); };
    std::string out = pad("true\\pred");
    for (const auto& l : labels) out += pad(l);
    out += "\n";
    for (std::size_t r = 0; r < labels.size(); ++r) {
      out += pad(labels[r]);
      for (int v : confusion[r]) out += pad(std::to_string(v));
      out += "\n";
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "accuracy %.4f (%zu/%zu), k=%zu, band=%.3f\n", accuracy, correct, items.size(), k,
                  band_fraction);
    return out + buf;
  }
};

namespace detail {
inline EvalReport finish_report(std::vector<EvalItem> items, const KnnOptions& knn) {
  if (items.empty()) throw Error(ErrorKind::EmptyTestSet, "no test trials to evaluate");
  std::sort(items.begin(), items.end(), [](const EvalItem& a, const EvalItem& b) { return a.trial_id < b.trial_id; });
  EvalReport r;
  r.k = knn.k;
  r.band_fraction = knn.band_fraction;
  std::set<std::string> labels;
  for (const auto& it : items) {
    labels.insert(it.true_label);
    labels.insert(it.predicted_label);
  }
  r.labels.assign(labels.begin(), labels.end());
  auto pos = [&](const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(r.labels.begin(), r.labels.end(), l) - r.labels.begin());
  };
  r.confusion.assign(r.labels.size(), std::vector<int>(r.labels.size(), 0));
  for (const auto& it : items) {
    ++r.confusion[pos(it.true_label)][pos(it.predicted_label)];
    if (it.true_label == it.predicted_label) ++r.correct;
  }
  r.items = std::move(items);
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.items.size());
  return r;
}

inline EvalItem make_item(const LabeledSeries& q, const ClassResult& c) {
  return {q.id, q.label, c.predicted_label, c.neighbors.front().id, c.neighbors.front().distance, c.margin};
}
}  // namespace detail

/// Classifies every test series against the training set. Test labels are the
/// ground truth and are never consulted by the classifier.
inline EvalReport evaluate(std::span<const LabeledSeries> train, std::span<const LabeledSeries> test,
                           const KnnOptions& knn = {}) {
  if (train.empty()) throw Error(ErrorKind::EmptyTrainingSet, "training set is empty");
  if (test.empty()) throw Error(ErrorKind::EmptyTestSet, "test set is empty");
  std::vector<EvalItem> items(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    std::vector<double> dist(train.size());
    for (std::size_t j = 0; j < train.size(); ++j)
      dist[j] = dtw_distance(test[i].series, train[j].series, knn.band_fraction, knn.dtw);
    items[i] = detail::make_item(test[i], classify_from_distances(dist, train, knn.k));
  });
  return detail::finish_report(std::move(items), knn);
}

/// Leave-one-out over one labeled set, sharing a single distance matrix.
inline EvalReport evaluate_loo(std::span<const LabeledSeries> set, const KnnOptions& knn = {},
                               std::vector<std::vector<double>>* matrix_out = nullptr) {
  if (set.size() < 2) throw Error(ErrorKind::EmptyTrainingSet, "leave-one-out needs at least two series");
  std::vector<FeatureSeries> series;
  for (const auto& s : set) series.push_back(s.series);
  auto d = distance_matrix(series, knn.band_fraction, knn.dtw);
  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < set.size(); ++i)
    items.push_back(detail::make_item(set[i], classify_from_distances(d[i], set, knn.k, i)));
  if (matrix_out) *matrix_out = std::move(d);
  return detail::finish_report(std::move(items), knn);
}

/// Pulls trials from the service and evaluates them. Test ground truth comes
/// from the manifest only; the test service holds no labels.
inline EvalReport evaluate_service(IngestionClient& client, const CohortManifest& manifest, const EvalOptions& opt,
                                   bool leave_one_out) {
  auto truth = [&](const TrialPacket& p) -> std::string {
    if (opt.label_by == LabelSource::User) return p.user_id;
    if (const ManifestEntry* e = manifest.find(p.trial_id)) return e->true_label;
    if (p.label) return *p.label;
    throw Error(ErrorKind::InvalidArgument, "no ground truth for trial " + p.trial_id);
  };
  std::vector<LabeledSeries> train;
  for (const StoredTrial& t : client.pull(Mode::Train)) {
    if (leave_one_out) {
      train.push_back(to_labeled(t.packet, truth(t.packet), opt));
    } else if (opt.label_by == LabelSource::User) {
      train.push_back(to_labeled(t.packet, t.packet.user_id, opt));
    } else if (t.packet.label) {
      train.push_back(to_labeled(t.packet, *t.packet.label, opt));
    }
  }
  if (leave_one_out) return evaluate_loo(train, opt.knn);
  std::vector<LabeledSeries> test;
  for (const StoredTrial& t : client.pull(Mode::Test)) {
    if (opt.label_by == LabelSource::Label && !manifest.find(t.packet.trial_id))
      throw Error(ErrorKind::InvalidArgument, "test trial " + t.packet.trial_id + " is not in the manifest");
    test.push_back(to_labeled(t.packet, truth(t.packet), opt));
  }
  if (test.empty()) throw Error(ErrorKind::EmptyTestSet, "the test service holds no trials");
  return evaluate(train, test, opt.knn);
}

}  // namespace sts
