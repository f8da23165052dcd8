#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gatenet/checkpoint.hpp"
#include "gatenet/config.hpp"
#include "gatenet/data.hpp"
#include "gatenet/metrics.hpp"
#include "gatenet/optim.hpp"

namespace gatenet {

struct TrainLogRow {
    std::int64_t iter = 0;
    double lr = 0;
    double loss = 0;
    double loss_fpn = 0;
    double loss_fused = 0;
};

struct EvalLogRow {
    int epoch = 0;
    double f_beta_max = 0;
    double mae = 0;
    double s_measure = 0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::vector<EvalLogRow> evals;
    double initial_loss = 0;
    double final_loss = 0;
    std::string checkpoint_path;
};

// Forward a dataset in batches and return one saliency map per sample.
// Samples are resized to the model input size if needed.
template <typename T>
std::vector<ScoreMap> predict_maps(const GateNet<T>& model, const std::vector<Sample>& samples,
                                   int batch_size = 4) {
    require(!samples.empty(), "predict_maps: empty dataset");
    const int S = model.config().input_size;
    std::vector<Sample> resized;
    resized.reserve(samples.size());
    for (const Sample& s : samples) resized.push_back(resize_sample(s, S));

    std::vector<ScoreMap> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < resized.size(); i += static_cast<std::size_t>(batch_size)) {
        std::vector<int> idx;
        for (std::size_t j = i; j < std::min(resized.size(), i + static_cast<std::size_t>(batch_size)); ++j)
            idx.push_back(static_cast<int>(j));
        auto [images, masks] = to_batch<T>(resized, idx);
        Tape<T> tape;
        const ForwardResult<T> fwd = model.forward(tape, images);
        const Tensor4<T>& fm = fwd.final_map.value();
        for (int b = 0; b < fm.batch(); ++b) {
            ScoreMap m(fm.height(), fm.width());
            for (int y = 0; y < fm.height(); ++y)
                for (int x = 0; x < fm.width(); ++x)
                    m.at(y, x) = static_cast<double>(fm.at(b, 0, y, x));
            out.push_back(std::move(m));
        }
    }
    return out;
}

template <typename T>
MetricsReport evaluate_model(const GateNet<T>& model, const std::vector<Sample>& samples,
                             int batch_size = 4) {
    const std::vector<ScoreMap> preds = predict_maps(model, samples, batch_size);
    std::vector<BinaryMask> gts;
    gts.reserve(samples.size());
    const int S = model.config().input_size;
    for (const Sample& s : samples) gts.push_back(resize_sample(s, S).mask);
    return compute_metrics(preds, gts);
}

struct GateStats {
    std::array<double, 5> mean_g1{};
    std::array<double, 5> mean_g2{};
};

// Per-level averages of the two gate values over a dataset.
template <typename T>
GateStats gate_statistics(const GateNet<T>& model, const std::vector<Sample>& samples,
                          int batch_size = 4) {
    require(!samples.empty(), "gate_statistics: empty dataset");
    const int S = model.config().input_size;
    GateStats stats;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
        std::vector<Sample> resized;
        std::vector<int> idx;
        for (std::size_t j = i; j < std::min(samples.size(), i + static_cast<std::size_t>(batch_size)); ++j) {
            resized.push_back(resize_sample(samples[j], S));
            idx.push_back(static_cast<int>(resized.size()) - 1);
        }
        auto [images, masks] = to_batch<T>(resized, idx);
        Tape<T> tape;
        const ForwardResult<T> fwd = model.forward(tape, images);
        for (int level = 0; level < 5; ++level) {
            const Tensor4<T>& g1 = fwd.gates[static_cast<std::size_t>(level)].first.value();
            const Tensor4<T>& g2 = fwd.gates[static_cast<std::size_t>(level)].second.value();
            for (int b = 0; b < g1.batch(); ++b) {
                stats.mean_g1[static_cast<std::size_t>(level)] += static_cast<double>(g1.data()[b]);
                stats.mean_g2[static_cast<std::size_t>(level)] += static_cast<double>(g2.data()[b]);
            }
        }
        seen += idx.size();
    }
    for (int level = 0; level < 5; ++level) {
        stats.mean_g1[static_cast<std::size_t>(level)] /= static_cast<double>(seen);
        stats.mean_g2[static_cast<std::size_t>(level)] /= static_cast<double>(seen);
    }
    return stats;
}

namespace detail_train {

inline std::string log_row_csv(const TrainLogRow& r) {
    return strcat_all(r.iter, ",", format_double(r.lr), ",", format_double(r.loss), ",",
                      format_double(r.loss_fpn), ",", format_double(r.loss_fused), "\n");
}

inline std::string eval_row_csv(const EvalLogRow& r) {
    return strcat_all(r.epoch, ",", format_double(r.f_beta_max), ",", format_double(r.mae),
                      ",", format_double(r.s_measure), "\n");
}

}  // namespace detail_train

// Deterministic single-threaded training loop. All randomness (shuffling,
// augmentation) is derived from (seed, epoch, position), so a run resumed
// from a checkpoint continues exactly like an uninterrupted one.
// If out_dir is non-empty, writes train_log.csv, eval_log.csv and
// checkpoint.gnet there. Aborts on a non-finite loss, keeping the last
// checkpoint on disk. stop_iter > 0 interrupts the schedule early (the
// learning-rate schedule still spans the full configured run).
template <typename T>
TrainResult train_model(GateNet<T>& model, const TrainConfig& cfg,
                        const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set, const std::string& out_dir,
                        std::uint64_t start_iter = 0, std::int64_t stop_iter = 0) {
    cfg.validate();
    require(!train_set.empty(), "train_model: empty training set");
    const std::int64_t ipe =
        static_cast<std::int64_t>((train_set.size() + static_cast<std::size_t>(cfg.batch) - 1) /
                                  static_cast<std::size_t>(cfg.batch));
    const std::int64_t max_iter = ipe * cfg.epochs;
    const std::int64_t end_iter = stop_iter > 0 ? std::min(stop_iter, max_iter) : max_iter;
    require(static_cast<std::int64_t>(start_iter) <= max_iter,
            "train_model: start iteration beyond schedule");

    namespace fs = std::filesystem;
    std::ofstream train_log, eval_log;
    std::string ckpt_path;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const bool fresh = start_iter == 0;
        train_log.open((fs::path(out_dir) / "train_log.csv").string(),
                       fresh ? std::ios::trunc : std::ios::app);
        eval_log.open((fs::path(out_dir) / "eval_log.csv").string(),
                      fresh ? std::ios::trunc : std::ios::app);
        if (fresh) {
            train_log << "iter,lr,loss,loss_fpn,loss_fused\n";
            eval_log << "epoch,f_beta_max,mae,s_measure\n";
        }
        ckpt_path = (fs::path(out_dir) / "checkpoint.gnet").string();
    }
    const std::string config_text = config_to_text(cfg);
    const AugmentationConfig aug_cfg;

    TrainResult result;
    result.checkpoint_path = ckpt_path;
    std::vector<std::vector<int>> batches;
    std::int64_t batches_epoch = -1;

    auto save = [&](std::uint64_t iter) {
        if (!ckpt_path.empty()) save_checkpoint(ckpt_path, model, iter, config_text);
    };

    for (std::int64_t it = static_cast<std::int64_t>(start_iter); it < end_iter; ++it) {
        const std::int64_t epoch = it / ipe;
        const std::int64_t pos = it % ipe;
        if (epoch != batches_epoch) {
            batches = make_batches(train_set.size(), cfg.batch,
                                   mix_seed(cfg.seed, 0x5u, static_cast<std::uint64_t>(epoch)));
            batches_epoch = epoch;
        }

        std::vector<Sample> prepared;
        const std::vector<int>& idx = batches[static_cast<std::size_t>(pos)];
        std::vector<int> local;
        for (std::size_t slot = 0; slot < idx.size(); ++slot) {
            const Sample& src = train_set[static_cast<std::size_t>(idx[slot])];
            Sample s = src;
            if (cfg.augment) {
                Rng rng(mix_seed(cfg.seed, 0xA6u,
                                 static_cast<std::uint64_t>(epoch) * 1000003u +
                                     static_cast<std::uint64_t>(pos) * 131u + slot));
                s = augment(s, aug_cfg, rng);
            }
            prepared.push_back(resize_sample(s, cfg.model.input_size));
            local.push_back(static_cast<int>(slot));
        }
        auto [images, masks] = to_batch<T>(prepared, local);

        Tape<T> tape;
        const ForwardResult<T> fwd = model.forward(tape, images);
        const LossParts<T> parts = model.loss(tape, fwd, masks);
        const double loss = static_cast<double>(parts.total.value().data()[0]);
        if (!std::isfinite(loss))
            throw NumericError(strcat_all("train_model: non-finite loss at iteration ", it,
                                          "; last checkpoint retained"));
        tape.backward(parts.total);
        model.collect_grads(tape, fwd);
        const double lr = poly_lr(it, max_iter, cfg.base_lr, cfg.poly_power);
        sgd_step(model.params(), static_cast<T>(lr), static_cast<T>(cfg.momentum),
                 static_cast<T>(cfg.weight_decay));

        TrainLogRow row;
        row.iter = it;
        row.lr = lr;
        row.loss = loss;
        row.loss_fpn = parts.fpn.valid() ? static_cast<double>(parts.fpn.value().data()[0]) : 0.0;
        row.loss_fused =
            parts.fused.valid() ? static_cast<double>(parts.fused.value().data()[0]) : 0.0;
        result.log.push_back(row);
        if (train_log.is_open()) train_log << detail_train::log_row_csv(row);

        const bool epoch_end = pos == ipe - 1;
        if (cfg.checkpoint_every > 0 ? (it + 1) % cfg.checkpoint_every == 0 : epoch_end)
            save(static_cast<std::uint64_t>(it + 1));

        if (epoch_end && !val_set.empty()) {
            const MetricsReport m = evaluate_model(model, val_set, cfg.batch);
            EvalLogRow er;
            er.epoch = static_cast<int>(epoch);
            er.f_beta_max = m.f_beta_max;
            er.mae = m.mae;
            er.s_measure = m.s_measure;
            result.evals.push_back(er);
            if (eval_log.is_open()) eval_log << detail_train::eval_row_csv(er);
        }
    }
    save(static_cast<std::uint64_t>(end_iter));

    if (!result.log.empty()) {
        result.initial_loss = result.log.front().loss;
        result.final_loss = result.log.back().loss;
    }
    return result;
}

}  // namespace gatenet
