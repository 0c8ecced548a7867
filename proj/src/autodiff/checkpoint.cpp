#include "tomo/autodiff/checkpoint.hpp"

#include "../binary_io.hpp"

#include <map>
#include <stdexcept>

namespace tomo::ad {

using tomo::detail::Reader;
using tomo::detail::Writer;

OptimizerState OptimizerState::capture(const Adam& adam) {
    OptimizerState s;
    s.step = adam.steps();
    s.config = adam.config();
    for (const auto& slot : adam.slots()) s.moments.push_back({slot.param->name, slot.m, slot.v});
    return s;
}

void OptimizerState::restore(Adam& adam) const {
    std::map<std::string, const Moments*> by_name;
    for (const auto& m : moments) by_name[m.name] = &m;
    for (auto& slot : adam.slots()) {
        auto it = by_name.find(slot.param->name);
        if (it == by_name.end()) continue;
        if (it->second->m.size() != slot.m.size()) {
            throw std::invalid_argument("optimizer state shape mismatch for " + slot.param->name);
        }
        slot.m = Tensor(slot.m.shape(), it->second->m.values());
        slot.v = Tensor(slot.v.shape(), it->second->v.values());
    }
    adam.set_steps(step);
}

Checkpoint Checkpoint::capture(const std::vector<Parameter*>& params, const Adam* adam) {
    Checkpoint c;
    for (const Parameter* p : params) c.params.push_back({p->name, p->trainable, p->value});
    if (adam) c.optimizer = OptimizerState::capture(*adam);
    return c;
}

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : params) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

void Checkpoint::apply(const std::vector<Parameter*>& targets) const {
    for (Parameter* p : targets) {
        const Entry* e = find(p->name);
        if (!e) throw std::invalid_argument("checkpoint has no parameter named '" + p->name + "'");
        if (e->value.shape() != p->value.shape()) {
            throw std::invalid_argument("checkpoint shape " + to_string(e->value.shape()) + " for '" + p->name +
                                        "' does not match " + to_string(p->value.shape()));
        }
        p->value = e->value;
        p->zero_grad();
    }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    Writer w(path);
    w.bytes("TSWT", 4);
    w.uint<std::uint16_t>(1);
    w.uint(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& e : ckpt.params) {
        w.str(e.name);
        w.uint<std::uint8_t>(e.trainable ? 1 : 0);
        w.uint(static_cast<std::uint32_t>(e.value.rank()));
        for (Index d : e.value.shape()) w.uint(static_cast<std::uint32_t>(d));
        for (Index i = 0; i < e.value.size(); ++i) w.f64(e.value[i]);
    }
    w.uint<std::uint8_t>(ckpt.optimizer ? 1 : 0);
    if (ckpt.optimizer) {
        const auto& o = *ckpt.optimizer;
        w.uint(static_cast<std::uint64_t>(o.step));
        w.f64(o.config.beta1);
        w.f64(o.config.beta2);
        w.f64(o.config.eps);
        w.uint(static_cast<std::uint32_t>(o.moments.size()));
        for (const auto& m : o.moments) {
            w.str(m.name);
            w.uint(static_cast<std::uint32_t>(m.m.size()));
            for (Index i = 0; i < m.m.size(); ++i) w.f64(m.m[i]);
            for (Index i = 0; i < m.v.size(); ++i) w.f64(m.v[i]);
        }
    }
    w.close();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    r.magic("TSWT");
    const auto version = r.uint<std::uint16_t>();
    if (version != 1) throw IoError("unsupported TSWT version in " + path.string());
    Checkpoint c;
    const auto count = r.uint<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        Checkpoint::Entry e;
        e.name = r.str();
        e.trainable = r.uint<std::uint8_t>() != 0;
        const auto rank = r.uint<std::uint32_t>();
        if (rank > 8) throw IoError("implausible tensor rank in " + path.string());
        Shape shape(rank);
        std::uint64_t n = 1;
        for (auto& d : shape) {
            d = r.uint<std::uint32_t>();
            n *= static_cast<std::uint64_t>(d);
        }
        if (n > (1ull << 31)) throw IoError("implausible tensor size in " + path.string());
        e.value = Tensor(shape);
        for (Index i = 0; i < e.value.size(); ++i) e.value[i] = r.f64();
        c.params.push_back(std::move(e));
    }
    if (r.uint<std::uint8_t>() != 0) {
        OptimizerState o;
        o.step = static_cast<std::int64_t>(r.uint<std::uint64_t>());
        o.config.beta1 = r.f64();
        o.config.beta2 = r.f64();
        o.config.eps = r.f64();
        const auto m_count = r.uint<std::uint32_t>();
        for (std::uint32_t k = 0; k < m_count; ++k) {
            OptimizerState::Moments m;
            m.name = r.str();
            const auto n = r.uint<std::uint32_t>();
            if (n > (1u << 31)) throw IoError("implausible moment size in " + path.string());
            m.m = Tensor({static_cast<Index>(n)});
            m.v = Tensor({static_cast<Index>(n)});
            for (Index i = 0; i < m.m.size(); ++i) m.m[i] = r.f64();
            for (Index i = 0; i < m.v.size(); ++i) m.v[i] = r.f64();
            o.moments.push_back(std::move(m));
        }
        c.optimizer = std::move(o);
    }
    return c;
}

}  // namespace tomo::ad
