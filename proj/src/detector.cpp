#include "cilf/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cilf/kernels.hpp"
#include "cilf/rng.hpp"
#include "cilf/trainer.hpp"

namespace cilf {

void PacingConfig::validate() const {
    if (!(upsilon > 0.0) || upsilon > 1.0) throw ConfigError("pacing: upsilon must be in (0,1]");
    if (!(delta > 1.0)) throw ConfigError("pacing: delta must be > 1");
    if (phi == 0) throw ConfigError("pacing: phi must be >= 1");
}

WeightingResult confidence_weights(const DenseMatrix& embeddings, const PrototypeSet& known,
                                   double alpha, const WeightingConfig& cfg) {
    if (known.empty()) throw UsageError("confidence_weights: no known prototypes");
    const DenseMatrix probs = proto_prob_batch(embeddings, known, alpha);

    WeightingResult result;
    result.weights.resize(embeddings.rows);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const double* row = probs.row(i);
        double top = row[0];
        for (std::size_t c = 1; c < probs.cols; ++c) top = std::max(top, row[c]);
        result.weights[i].index = i;
        result.weights[i].confidence = -std::log(std::max(top, 1e-300));
    }
    if (cfg.use_median) {
        std::vector<double> u(embeddings.rows);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = result.weights[i].confidence;
        std::sort(u.begin(), u.end());
        const std::size_t n = u.size();
        result.gamma = (n % 2 == 1) ? u[n / 2] : 0.5 * (u[n / 2 - 1] + u[n / 2]);
    } else {
        result.gamma = cfg.gamma;
    }
    for (InstanceWeight& iw : result.weights) {
        const double d = iw.confidence - result.gamma;
        iw.weight = d * d;
    }
    return result;
}

namespace {

// Weighted assignment objective sum_j w_j ||f_j - mu_{a(j)}||^2 for ids laid
// out in `mus` row order.
double kmeans_objective(const DenseMatrix& embeddings, const std::vector<double>& weights,
                        const DenseMatrix& mus, const std::vector<std::size_t>& assign) {
    double obj = 0.0;
    for (std::size_t j = 0; j < embeddings.rows; ++j) {
        obj += weights[j] *
               squared_distance(embeddings.row(j), mus.row(assign[j]), embeddings.cols);
    }
    return obj;
}

// Farthest-point selection: repeatedly take the candidate with the largest
// min squared distance to the obstacle rows; ties go to the lowest index.
std::vector<std::size_t> farthest_point_seeds(const DenseMatrix& embeddings,
                                              const std::vector<std::size_t>& candidates,
                                              const DenseMatrix& obstacles, std::size_t k) {
    std::vector<std::size_t> chosen;
    std::vector<double> min_dist(embeddings.rows, std::numeric_limits<double>::infinity());
    for (std::size_t j : candidates) {
        for (std::size_t o = 0; o < obstacles.rows; ++o) {
            min_dist[j] = std::min(min_dist[j], squared_distance(embeddings.row(j),
                                                                 obstacles.row(o),
                                                                 embeddings.cols));
        }
    }
    std::vector<bool> taken(embeddings.rows, false);
    for (std::size_t pick = 0; pick < k && pick < candidates.size(); ++pick) {
        std::size_t best = candidates.front();
        double best_d = -1.0;
        for (std::size_t j : candidates) {
            if (taken[j]) continue;
            if (min_dist[j] > best_d) {
                best_d = min_dist[j];
                best = j;
            }
        }
        if (best_d < 0.0) break;
        taken[best] = true;
        chosen.push_back(best);
        for (std::size_t j : candidates) {
            if (taken[j]) continue;
            min_dist[j] = std::min(min_dist[j], squared_distance(embeddings.row(j),
                                                                 embeddings.row(best),
                                                                 embeddings.cols));
        }
    }
    return chosen;
}

}  // namespace

WeightedKMeansResult weighted_kmeans_init(const DenseMatrix& embeddings,
                                          const std::vector<double>& weights,
                                          const PrototypeSet& old_prototypes, std::size_t k,
                                          double beta, std::size_t max_iters) {
    if (embeddings.rows == 0) throw UsageError("weighted_kmeans_init: empty window");
    if (weights.size() != embeddings.rows) {
        throw ShapeError("weighted_kmeans_init: weights length mismatch");
    }
    double weight_sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw UsageError("weighted_kmeans_init: negative weight");
        weight_sum += w;
    }
    if (weight_sum <= 0.0) throw UsageError("weighted_kmeans_init: all weights are zero");
    if (old_prototypes.empty()) throw UsageError("weighted_kmeans_init: no known prototypes");

    WeightedKMeansResult result;
    const std::vector<int> known_ids = old_prototypes.ids();
    const DenseMatrix known_mat = old_prototypes.as_matrix();

    // Seed novel centroids among instances far from every known prototype.
    std::vector<std::size_t> seed_rows;
    if (k > 0) {
        std::vector<double> to_known(embeddings.rows);
        {
            DenseMatrix d;
            kernels::pairwise_sqdist(embeddings, known_mat, d);
            std::vector<std::size_t> arg;
            kernels::nearest_column(d, arg, to_known);
        }
        std::vector<double> sorted = to_known;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median =
            (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        std::vector<std::size_t> candidates;
        for (std::size_t j = 0; j < embeddings.rows; ++j) {
            if (to_known[j] > median) candidates.push_back(j);
        }
        if (candidates.empty()) {
            std::cerr << "weighted_kmeans_init: no far candidates, falling back to global "
                         "farthest-point seeding\n";
            result.used_global_seed_fallback = true;
            candidates.resize(embeddings.rows);
            std::iota(candidates.begin(), candidates.end(), 0);
        }
        seed_rows = farthest_point_seeds(embeddings, candidates, known_mat, k);
        if (seed_rows.size() < k) {
            result.used_global_seed_fallback = true;
            std::vector<std::size_t> all(embeddings.rows);
            std::iota(all.begin(), all.end(), 0);
            seed_rows = farthest_point_seeds(embeddings, all, known_mat, k);
        }
    }
    const std::size_t k_eff = seed_rows.size();

    // Centroid layout: knowns first (in id order), then novel clusters.
    const int base_novel_id = known_ids.empty() ? 0 : known_ids.back() + 1;
    for (std::size_t j = 0; j < k_eff; ++j) {
        result.novel_ids.push_back(base_novel_id + static_cast<int>(j));
    }
    DenseMatrix mus(known_ids.size() + k_eff, embeddings.cols);
    for (std::size_t c = 0; c < known_ids.size(); ++c) {
        std::copy(known_mat.row(c), known_mat.row(c) + embeddings.cols, mus.row(c));
    }
    for (std::size_t j = 0; j < k_eff; ++j) {
        std::copy(embeddings.row(seed_rows[j]), embeddings.row(seed_rows[j]) + embeddings.cols,
                  mus.row(known_ids.size() + j));
    }

    std::vector<std::size_t> assign(embeddings.rows);
    std::vector<std::size_t> prev_assign;
    double prev_obj = std::numeric_limits<double>::infinity();
    DenseMatrix dist;
    std::vector<double> nearest_val;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        kernels::pairwise_sqdist(embeddings, mus, dist);
        kernels::nearest_column(dist, assign, nearest_val);

        DenseMatrix updated = mus;
        for (std::size_t c = 0; c < mus.rows; ++c) {
            double wsum = 0.0;
            std::vector<double> acc(embeddings.cols, 0.0);
            for (std::size_t j = 0; j < embeddings.rows; ++j) {
                if (assign[j] != c) continue;
                wsum += weights[j];
                const double* f = embeddings.row(j);
                for (std::size_t d = 0; d < embeddings.cols; ++d) acc[d] += weights[j] * f[d];
            }
            if (wsum <= 0.0) continue;  // unassigned cluster keeps its centroid
            double* mu = updated.row(c);
            if (c < known_ids.size()) {
                const double* anchor = known_mat.row(c);
                for (std::size_t d = 0; d < embeddings.cols; ++d) {
                    mu[d] = beta * anchor[d] + (1.0 - beta) * acc[d] / wsum;
                }
            } else {
                for (std::size_t d = 0; d < embeddings.cols; ++d) mu[d] = acc[d] / wsum;
            }
        }

        double obj = kmeans_objective(embeddings, weights, updated, assign);
        if (obj > prev_obj) {
            // The blended known-centroid update is not the unconstrained
            // minimizer; in the rare case it raises the objective, keep the
            // previous centroids and declare convergence.
            obj = kmeans_objective(embeddings, weights, mus, assign);
            result.objective_history.push_back(obj);
            break;
        }
        mus = std::move(updated);
        result.objective_history.push_back(obj);
        prev_obj = obj;
        if (!prev_assign.empty() && prev_assign == assign) break;
        prev_assign = assign;
    }

    result.prototypes.ema_beta = old_prototypes.ema_beta;
    result.assignment.resize(embeddings.rows);
    std::vector<int> layout_ids = known_ids;
    layout_ids.insert(layout_ids.end(), result.novel_ids.begin(), result.novel_ids.end());
    for (std::size_t c = 0; c < layout_ids.size(); ++c) {
        result.prototypes.centroids[layout_ids[c]] =
            std::vector<double>(mus.row(c), mus.row(c) + embeddings.cols);
    }
    for (std::size_t j = 0; j < embeddings.rows; ++j) {
        result.assignment[j] = layout_ids[assign[j]];
    }
    return result;
}

std::vector<std::size_t> pacing_schedule(std::size_t n, const PacingConfig& cfg,
                                         std::size_t num_batches) {
    cfg.validate();
    if (n == 0) throw UsageError("pacing_schedule: empty window");
    std::vector<std::size_t> sizes(num_batches);
    for (std::size_t l = 0; l < num_batches; ++l) {
        const double frac = std::min(cfg.upsilon * std::pow(cfg.delta,
                                                            std::floor(static_cast<double>(l) /
                                                                       static_cast<double>(cfg.phi))),
                                     1.0);
        const auto h = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
        sizes[l] = std::clamp<std::size_t>(h, 1, n);
    }
    return sizes;
}

namespace {

std::size_t default_batches_per_epoch(const PacingConfig& cfg) {
    // Enough steps to reach the full-window plateau, then one more stage.
    std::size_t stages = 0;
    double frac = cfg.upsilon;
    while (frac < 1.0 && stages < 64) {
        frac *= cfg.delta;
        ++stages;
    }
    return cfg.phi * (stages + 1);
}

std::vector<int> argmax_pseudo_labels(const DenseMatrix& embeddings, const PrototypeSet& protos,
                                      double alpha) {
    const DenseMatrix probs = proto_prob_batch(embeddings, protos, alpha);
    const std::vector<int> ids = protos.ids();
    std::vector<int> labels(embeddings.rows);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const double* row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c) {
            if (row[c] > row[best]) best = c;
        }
        labels[i] = ids[best];
    }
    return labels;
}

}  // namespace

FinetuneResult curriculum_finetune(const EncoderModel& model, const PrototypeSet& prototypes_init,
                                   const DenseMatrix& window_inputs, const PrototypeSet& known,
                                   const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                                   const PacingConfig& pacing_cfg, const WeightingConfig& w_cfg,
                                   const DetectorConfig& det_cfg, std::uint64_t seed) {
    if (window_inputs.rows == 0) throw UsageError("curriculum_finetune: empty window");
    for (int id : known.ids()) {
        if (!prototypes_init.contains(id)) {
            throw UsageError("curriculum_finetune: initial prototypes missing known class " +
                             std::to_string(id));
        }
    }

    FinetuneResult result;
    result.model = model;
    result.prototypes = prototypes_init;

    // Difficulty order from the incoming model; fixed for the whole fine-tune.
    const DenseMatrix base_emb = forward(model, window_inputs);
    const WeightingResult weighting = confidence_weights(base_emb, known, loss_cfg.alpha, w_cfg);
    std::vector<std::size_t> order(window_inputs.rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = weighting.weights[a].weight;
        const double wb = weighting.weights[b].weight;
        if (wa != wb) return wa > wb;  // easiest (most reliable) first
        return a < b;
    });

    result.pseudo_labels =
        argmax_pseudo_labels(forward(result.model, window_inputs), result.prototypes,
                             loss_cfg.alpha);

    const std::size_t num_batches = det_cfg.batches_per_epoch > 0
                                        ? det_cfg.batches_per_epoch
                                        : default_batches_per_epoch(pacing_cfg);
    const std::vector<std::size_t> sizes =
        pacing_schedule(window_inputs.rows, pacing_cfg, num_batches);

    TrainLoop loop(result.model, result.prototypes, loss_cfg, opt_cfg, det_cfg.proto_beta);
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < det_cfg.finetune_epochs; ++epoch) {
        if (det_cfg.random_order) rng.shuffle(order);
        for (std::size_t size : sizes) {
            DenseMatrix batch(size, window_inputs.cols);
            std::vector<int> batch_labels(size);
            for (std::size_t r = 0; r < size; ++r) {
                const std::size_t row = order[r];
                std::copy(window_inputs.row(row), window_inputs.row(row) + window_inputs.cols,
                          batch.row(r));
                batch_labels[r] = result.pseudo_labels[row];
            }
            loop.step_batch(batch, batch_labels, nullptr, &known);
        }
        loop.end_epoch();
        result.pseudo_labels =
            argmax_pseudo_labels(forward(result.model, window_inputs), result.prototypes,
                                 loss_cfg.alpha);
    }
    return result;
}

double silhouette_cvi(const DenseMatrix& embeddings, const std::vector<int>& assignments) {
    if (embeddings.rows != assignments.size()) {
        throw ShapeError("silhouette_cvi: embeddings/assignments length mismatch");
    }
    std::map<int, int> dense;
    for (int a : assignments) dense.emplace(a, 0);
    if (dense.size() < 2) {
        throw UsageError("silhouette_cvi: undefined for fewer than 2 clusters");
    }
    int next = 0;
    for (auto& [_, idx] : dense) idx = next++;
    std::vector<int> packed(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) packed[i] = dense[assignments[i]];

    std::vector<double> samples;
    kernels::silhouette_samples(embeddings, packed, next, samples);
    double cvi = 0.0;
    for (double s : samples) cvi += s;
    return cvi;
}

DetectionReport estimate_classes(const EncoderModel& model, const PrototypeSet& prototypes,
                                 const DenseMatrix& window_inputs, std::size_t k_max,
                                 const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                                 const PacingConfig& pacing_cfg, const WeightingConfig& w_cfg,
                                 const DetectorConfig& det_cfg, std::uint64_t seed) {
    if (window_inputs.rows == 0) throw UsageError("estimate_classes: empty window");

    const DenseMatrix base_emb = forward(model, window_inputs);
    const WeightingResult weighting = confidence_weights(base_emb, prototypes, loss_cfg.alpha,
                                                         w_cfg);
    std::vector<double> weights(window_inputs.rows);
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = weighting.weights[i].weight;
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0.0; })) {
        // Degenerate window (all confidences identical); fall back to uniform.
        std::fill(weights.begin(), weights.end(), 1.0);
    }

    const auto num_k = static_cast<std::int64_t>(k_max + 1);
    std::vector<FinetuneResult> runs(static_cast<std::size_t>(num_k));
    std::vector<std::vector<int>> novel_ids(static_cast<std::size_t>(num_k));
    std::vector<double> cvi(static_cast<std::size_t>(num_k),
                            std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> failures(static_cast<std::size_t>(num_k));

    // Independent per-K work with seeds derived from K, so the merged result
    // is the same no matter how iterations are scheduled.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t kk = 0; kk < num_k; ++kk) {
        const auto k = static_cast<std::size_t>(kk);
        try {
            WeightedKMeansResult init =
                weighted_kmeans_init(base_emb, weights, prototypes, k, det_cfg.proto_beta,
                                     det_cfg.kmeans_max_iters);
            FinetuneResult ft =
                curriculum_finetune(model, init.prototypes, window_inputs, prototypes, loss_cfg,
                                    opt_cfg, pacing_cfg, w_cfg, det_cfg, Rng::derive(seed, k));
            const DenseMatrix emb = forward(ft.model, window_inputs);
            try {
                cvi[k] = silhouette_cvi(emb, ft.pseudo_labels);
            } catch (const UsageError&) {
                // Everything collapsed into one cluster: leave the CVI undefined.
            }
            runs[k] = std::move(ft);
            novel_ids[k] = std::move(init.novel_ids);
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    }
    for (std::int64_t kk = 0; kk < num_k; ++kk) {
        if (!failures[static_cast<std::size_t>(kk)].empty()) {
            throw UsageError("estimate_classes: K=" + std::to_string(kk) + ": " +
                             failures[static_cast<std::size_t>(kk)]);
        }
    }

    DetectionReport report;
    for (std::int64_t kk = 0; kk < num_k; ++kk) {
        report.cvi_curve[static_cast<int>(kk)] = cvi[static_cast<std::size_t>(kk)];
    }

    int best = 0;
    bool have_best = false;
    for (std::int64_t kk = 0; kk < num_k; ++kk) {
        const double v = cvi[static_cast<std::size_t>(kk)];
        if (!std::isfinite(v)) continue;
        if (!have_best || v > cvi[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(kk);
            have_best = true;
        }
    }
    report.k_star = have_best ? best : 0;

    // Knee alternative: the interior K where the curve is most concave.
    report.k_star_knee = report.k_star;
    double best_curv = -std::numeric_limits<double>::infinity();
    bool have_knee = false;
    for (std::int64_t kk = 1; kk + 1 < num_k; ++kk) {
        const double prev = cvi[static_cast<std::size_t>(kk - 1)];
        const double mid = cvi[static_cast<std::size_t>(kk)];
        const double next = cvi[static_cast<std::size_t>(kk + 1)];
        if (!std::isfinite(prev) || !std::isfinite(mid) || !std::isfinite(next)) continue;
        const double curvature = 2.0 * mid - prev - next;
        if (curvature > best_curv) {
            best_curv = curvature;
            report.k_star_knee = static_cast<int>(kk);
            have_knee = true;
        }
    }
    if (!have_knee) report.k_star_knee = report.k_star;

    const int chosen = det_cfg.kstar_by_knee ? report.k_star_knee : report.k_star;
    FinetuneResult& winner = runs[static_cast<std::size_t>(chosen)];
    report.pseudo_labels = std::move(winner.pseudo_labels);
    report.model = std::move(winner.model);
    report.prototypes = std::move(winner.prototypes);
    report.novel_ids = std::move(novel_ids[static_cast<std::size_t>(chosen)]);
    if (det_cfg.kstar_by_knee) report.k_star = chosen;

    // Novelty score: distance to the nearest known-class prototype under the
    // fine-tuned embedding.
    PrototypeSet known_only;
    known_only.ema_beta = prototypes.ema_beta;
    for (int id : prototypes.ids()) known_only.centroids[id] = report.prototypes.centroids.at(id);
    const DenseMatrix final_emb = forward(report.model, window_inputs);
    DenseMatrix dist;
    kernels::pairwise_sqdist(final_emb, known_only.as_matrix(), dist);
    std::vector<std::size_t> arg;
    kernels::nearest_column(dist, arg, report.novelty_scores);
    return report;
}

std::string report_to_json(const DetectionReport& report) {
    nlohmann::json doc;
    doc["k_star"] = report.k_star;
    doc["k_star_knee"] = report.k_star_knee;
    nlohmann::json curve = nlohmann::json::object();
    for (const auto& [k, v] : report.cvi_curve) curve[std::to_string(k)] = v;
    doc["cvi"] = std::move(curve);
    doc["pseudo_labels"] = report.pseudo_labels;
    doc["novelty_scores"] = report.novelty_scores;
    return doc.dump(2) + "\n";
}

}  // namespace cilf
