#pragma once

#include "tomo/autodiff/adam.hpp"
#include "tomo/autodiff/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tomo::ad {

/// Optimizer state keyed by parameter name.
struct OptimizerState {
    std::int64_t step = 0;
    AdamConfig config;
    struct Moments {
        std::string name;
        Tensor m;
        Tensor v;
    };
    std::vector<Moments> moments;

    static OptimizerState capture(const Adam& adam);
    /// Copies moments into `adam` by parameter name.
    void restore(Adam& adam) const;
};

struct Checkpoint {
    struct Entry {
        std::string name;
        bool trainable = true;
        Tensor value;
    };
    std::vector<Entry> params;
    std::optional<OptimizerState> optimizer;

    static Checkpoint capture(const std::vector<Parameter*>& params, const Adam* adam = nullptr);
    /// Loads values by name; every parameter in `params` must be present with
    /// a matching shape. Entries for other parameters are ignored.
    void apply(const std::vector<Parameter*>& params) const;
    const Entry* find(const std::string& name) const;
};

// TSWT checkpoint, little-endian:
//   "TSWT" | u16 version (1) | u32 parameter count
//   per parameter: u32 name length | name | u8 trainable | u32 rank | u32 dims[rank] | f64 values
//   u8 has_optimizer; when 1:
//     i64 step | f64 beta1, beta2, eps | u32 count
//     per entry: u32 name length | name | u32 element count | f64 m | f64 v
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace tomo::ad
