#include "tomo/training.hpp"

#include "tomo/autodiff/ops.hpp"
#include "tomo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

namespace tomo {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

void TrainConfig::validate() const {
    for (const StageConfig* s : {&stage1, &stage2}) {
        if (s->epochs < 1) throw std::invalid_argument("training: epochs must be >= 1");
        if (s->batch < 1) throw std::invalid_argument("training: batch must be >= 1");
        if (!(s->lr > 0.0)) throw std::invalid_argument("training: lr must be > 0");
    }
    if (!(lambda >= 0.0)) throw std::invalid_argument("training: lambda must be >= 0");
    if (stage2_crop < 0) throw std::invalid_argument("training: stage2_crop must be >= 0");
    if (stage2_crops_per_scene < 1) throw std::invalid_argument("training: stage2_crops_per_scene must be >= 1");
}

namespace {

struct SliceRef {
    std::size_t record;
    Index range;
};

std::vector<SliceRef> slices_of(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& which) {
    std::vector<SliceRef> out;
    for (std::size_t i : which) {
        const DatasetRecord& rec = records.at(i);
        if (rec.echoes.azimuths != records.at(which.front()).echoes.azimuths) {
            throw std::invalid_argument("train_stage1: records disagree on the azimuth extent");
        }
        for (Index r = 0; r < rec.echoes.ranges; ++r) out.push_back({i, r});
    }
    return out;
}

/// Echo columns and ground-truth magnitudes of a batch of AE slices, laid
/// out side by side: (N, B * Az) and (L, B * Az).
struct SliceBatch {
    Tensor re, im, target;
};

SliceBatch gather_slices(const std::vector<DatasetRecord>& records, const SliceRef* refs, std::size_t count) {
    const EchoTensor& e0 = records[refs[0].record].echoes;
    const Index N = e0.baselines(), Az = e0.azimuths, L = records[refs[0].record].truth.bins();
    const Index M = static_cast<Index>(count) * Az;
    SliceBatch b{Tensor({N, M}), Tensor({N, M}), Tensor({L, M})};
    for (std::size_t k = 0; k < count; ++k) {
        const DatasetRecord& rec = records[refs[k].record];
        const Index r = refs[k].range;
        for (Index a = 0; a < Az; ++a) {
            const Index j = static_cast<Index>(k) * Az + a;
            for (Index n = 0; n < N; ++n) {
                const auto z = rec.echoes.data(n, rec.echoes.cell(r, a));
                b.re[n * M + j] = z.real();
                b.im[n * M + j] = z.imag();
            }
            for (Index l = 0; l < L; ++l) b.target[l * M + j] = rec.truth(r, a, l);
        }
    }
    return b;
}

std::string where(int stage, int epoch, std::size_t batch) {
    return "stage " + std::to_string(stage) + ", epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

void require_finite_loss(double v, int stage, int epoch, std::size_t batch) {
    if (!std::isfinite(v)) throw TrainingError("training diverged (non-finite loss) at " + where(stage, epoch, batch));
}

class Tracker {
public:
    Tracker(TrainResult& r, TomoModel& m, const TrainHooks& h) : result_(r), model_(m), hooks_(h) {}

    void log(int epoch, const std::string& split, double loss) {
        result_.curve.push_back({epoch, split, loss});
        if (hooks_.on_epoch) hooks_.on_epoch(result_.curve.back());
    }

    void offer(int epoch, double loss, const ad::Adam& adam) {
        if (result_.best_epoch == 0 || loss < result_.best_loss) {
            result_.best_epoch = epoch;
            result_.best_loss = loss;
            result_.best = ad::Checkpoint::capture(model_.parameters(), &adam);
        }
    }

private:
    TrainResult& result_;
    TomoModel& model_;
    const TrainHooks& hooks_;
};

}  // namespace

void set_prenet_frozen(TomoModel& model, bool frozen) {
    for (ad::Parameter* p : model.prenet().parameters()) p->frozen = frozen;
}

TrainResult train_stage1(const std::vector<DatasetRecord>& records, const DatasetSplit& split, TomoModel& model,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (split.train.empty()) throw std::invalid_argument("train_stage1: empty training split");
    const std::vector<SliceRef> train = slices_of(records, split.train);
    const std::vector<SliceRef> val = split.val.empty() ? std::vector<SliceRef>{} : slices_of(records, split.val);

    PreNet& net = model.prenet();
    ad::Adam adam({ad::ParamGroup{net.parameters(), cfg.stage1.lr}}, cfg.adam);
    TrainResult result;
    Tracker track(result, model, hooks);
    const auto batch = static_cast<std::size_t>(cfg.stage1.batch);

    auto run_batch = [&](const SliceRef* refs, std::size_t n, bool learn, int epoch, std::size_t bi) {
        SliceBatch b = gather_slices(records, refs, n);
        Graph g(learn);
        try {
            const ad::CVar out = net.forward(g, {g.constant(std::move(b.re)), g.constant(std::move(b.im))});
            const Var loss = loss_pre(ad::magnitude(out), g.constant(std::move(b.target)));
            const double v = loss.value().item();
            require_finite_loss(v, 1, epoch, bi);
            if (learn) {
                g.backward(loss);
                adam.step();
                adam.zero_grad();
            }
            return v;
        } catch (const ad::NonFiniteError& e) {
            throw TrainingError(where(1, epoch, bi) + ": " + e.what());
        }
    };

    std::vector<SliceRef> order = train;
    for (int epoch = 1; epoch <= cfg.stage1.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t bi = 0;
        for (std::size_t i = 0; i < order.size(); i += batch, ++bi) {
            const std::size_t n = std::min(batch, order.size() - i);
            sum += run_batch(order.data() + i, n, true, epoch, bi) * static_cast<double>(n);
        }
        const double train_loss = sum / static_cast<double>(order.size());
        track.log(epoch, "train", train_loss);

        double monitored = train_loss;
        if (!val.empty()) {
            double vs = 0.0;
            bi = 0;
            for (std::size_t i = 0; i < val.size(); i += batch, ++bi) {
                const std::size_t n = std::min(batch, val.size() - i);
                vs += run_batch(val.data() + i, n, false, epoch, bi) * static_cast<double>(n);
            }
            monitored = vs / static_cast<double>(val.size());
            track.log(epoch, "val", monitored);
        }
        track.offer(epoch, monitored, adam);
    }
    result.last = ad::Checkpoint::capture(model.parameters(), &adam);
    return result;
}

TrainResult train_stage2(const std::vector<DatasetRecord>& records, const DatasetSplit& split, TomoModel& model,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (split.train.empty()) throw std::invalid_argument("train_stage2: empty training split");

    ad::Adam adam({ad::ParamGroup{model.parameters(), cfg.stage2.lr}}, cfg.adam);
    TrainResult result;
    Tracker track(result, model, hooks);

    struct Window {
        std::size_t record;
        Index r0, a0, nr, na;
    };
    const auto group = static_cast<std::size_t>(cfg.stage2.batch);

    for (int epoch = 1; epoch <= cfg.stage2.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x5000 + static_cast<std::uint64_t>(epoch)));
        std::vector<Window> windows;
        for (std::size_t i : split.train) {
            const EchoTensor& e = records.at(i).echoes;
            const Index cr = cfg.stage2_crop > 0 ? std::min(cfg.stage2_crop, e.ranges) : e.ranges;
            const Index ca = cfg.stage2_crop > 0 ? std::min(cfg.stage2_crop, e.azimuths) : e.azimuths;
            const int draws = cfg.stage2_crop > 0 ? cfg.stage2_crops_per_scene : 1;
            for (int d = 0; d < draws; ++d) {
                std::uniform_int_distribution<Index> ur(0, e.ranges - cr), ua(0, e.azimuths - ca);
                const Index r0 = ur(rng);
                const Index a0 = ua(rng);
                windows.push_back({i, r0, a0, cr, ca});
            }
        }
        std::shuffle(windows.begin(), windows.end(), rng);

        double sum = 0.0;
        std::size_t bi = 0;
        for (std::size_t i = 0; i < windows.size(); i += group, ++bi) {
            const std::size_t n = std::min(group, windows.size() - i);
            for (std::size_t k = 0; k < n; ++k) {
                const Window& w = windows[i + k];
                const DatasetRecord& rec = records[w.record];
                const EchoTensor echoes = crop_echoes(rec.echoes, w.r0, w.a0, w.nr, w.na);
                const ReflectivityVolume truth = crop_volume(rec.truth, w.r0, w.a0, w.nr, w.na);
                Graph g;
                try {
                    const Var out = model.forward(g, echoes, true);
                    const Var target = g.constant(Tensor({w.nr, w.na, truth.bins()}, truth.data()));
                    const Var loss = loss_full(out, target, cfg.lambda);
                    const double v = loss.value().item();
                    require_finite_loss(v, 2, epoch, bi);
                    sum += v;
                    g.backward(ad::scale(loss, 1.0 / static_cast<double>(n)));
                } catch (const ad::NonFiniteError& e) {
                    throw TrainingError(where(2, epoch, bi) + ": " + e.what());
                }
            }
            adam.step();
            adam.zero_grad();
        }
        const double train_loss = sum / static_cast<double>(windows.size());
        track.log(epoch, "train", train_loss);

        double monitored = train_loss;
        if (!split.val.empty()) {
            double vs = 0.0;
            for (std::size_t i : split.val) {
                const DatasetRecord& rec = records.at(i);
                const ReflectivityVolume out = model.full_forward(rec.echoes);
                const double v = loss_full_value(out.data(), rec.truth.data(), cfg.lambda);
                require_finite_loss(v, 2, epoch, 0);
                vs += v;
            }
            monitored = vs / static_cast<double>(split.val.size());
            track.log(epoch, "val", monitored);
        }
        track.offer(epoch, monitored, adam);
    }
    result.last = ad::Checkpoint::capture(model.parameters(), &adam);
    return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,split,loss\n" << std::setprecision(17);
    for (const LossRecord& r : curve) out << r.epoch << ',' << r.split << ',' << r.loss << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace tomo
