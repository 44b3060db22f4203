#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlgfa/model.hpp"

namespace dlgfa {

// N sequences of T timesteps over d grouped features.
struct LongitudinalDataset {
    Tensor sequences;  // N x T x d
    GroupSpec group_spec;
    std::vector<std::string> subject_ids;
    std::vector<std::string> time_index;

    std::size_t count() const { return sequences.shape().empty() ? 0 : sequences.shape()[0]; }
    std::size_t timesteps() const { return sequences.shape()[1]; }
    std::size_t dim() const { return sequences.shape()[2]; }
    void validate() const;
};

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;
};

enum class OneBarMode { RowAsTime, ReplicateT };

// size x size one-bar images with N(0, noise_sd^2) pixel noise; each image row
// is one group. RowAsTime: timestep t carries the bar at row t (T = size).
// ReplicateT: a random bar row per sequence, the same image repeated
// replicate_t times.
LongitudinalDataset generate_one_bar(std::size_t n, std::size_t size, double noise_sd,
                                     std::uint64_t seed, OneBarMode mode = OneBarMode::RowAsTime,
                                     std::size_t replicate_t = 20);

// Wide CSV: header `subject,t,<group>.<feature>,...`, one row per (subject, t).
LongitudinalDataset load_wide_csv(const std::string& path);
void save_wide_csv(const LongitudinalDataset& ds, const std::string& path);

std::tuple<LongitudinalDataset, LongitudinalDataset, LongitudinalDataset>
split_dataset(const LongitudinalDataset& ds, const SplitSpec& spec);

// Shuffled T x B x d batches; the final short batch keeps its true size.
std::vector<Tensor> make_batches(const LongitudinalDataset& ds, std::size_t batch_size,
                                 std::uint64_t seed);

// Subset by sequence indices (used by splitting and tests).
LongitudinalDataset subset(const LongitudinalDataset& ds, const std::vector<std::size_t>& idx);

}  // namespace dlgfa
