// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/image.h"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace snk {

/// Closed interval of noise levels, 0 <= lo <= hi <= 1.
struct NoiseRange {
    double lo = 1.0;
    double hi = 1.0;
    bool operator==(const NoiseRange &) const = default;
};

/// A contiguous run of epochs. The noise range moves linearly from
/// `startRange` (held at epoch first - 1) to `endRange` (reached at
/// `last`); stages with equal endpoints are flat. Epochs are grouped into
/// cycles of generationSteps + trainSteps counted from `cycleOrigin`; the
/// trailing trainSteps epochs of each cycle are training steps.
struct ScheduleStage {
    std::string name;
    int first = 1;
    int last  = 1;
    NoiseRange startRange;
    NoiseRange endRange;
    int generationSteps = 0;
    int trainSteps      = 1;
    int cycleOrigin     = 1;
    bool fitterActive   = false;

    NoiseRange rangeAt(int epoch) const;
    bool isTrainStep(int epoch) const;
    bool annealed() const { return !(startRange == endRange); }
    bool operator==(const ScheduleStage &) const = default;
};

class DistillSchedule {
public:
    DistillSchedule() = default;
    explicit DistillSchedule(std::vector<ScheduleStage> stages);

    /// 1600 epochs: initialisation (early bootstrap 1-50, bootstrap 51-150,
    /// warm-up 151-200) at full noise with one training step per epoch, then
    /// distillation at 3 generation : 1 training step with full noise
    /// 201-500, [0.7, 1.0] 501-600, linear anneal to [0.1, 0.4] over
    /// 601-1500 and [0.1, 0.4] 1501-1600. The fitter runs from epoch 201.
    static DistillSchedule standard();

    /// The standard schedule with every stage boundary scaled to
    /// `totalEpochs` (rounded, each stage at least one epoch).
    static DistillSchedule scaled(int totalEpochs);

    const std::vector<ScheduleStage> &stages() const { return mStages; }
    int firstEpoch() const { return mStages.front().first; }
    int lastEpoch() const { return mStages.back().last; }

    /// Throws "epoch out of range" outside [first, last].
    const ScheduleStage &stageAt(int epoch) const;

    nlohmann::json toJson() const;
    static DistillSchedule fromJson(const nlohmann::json &j);
    bool operator==(const DistillSchedule &) const = default;

private:
    std::vector<ScheduleStage> mStages;
};

/// Range in effect at an epoch.
NoiseRange noiseRangeAt(const DistillSchedule &schedule, int epoch);

/// The uniform variate noiseLevelAt draws for (seed, epoch, stream).
double noiseLevelVariate(std::uint64_t seed, int epoch, std::uint64_t stream = 0);

/// lambda = lo + u * (hi - lo) with u from noiseLevelVariate.
double noiseLevelAt(const DistillSchedule &schedule, int epoch, std::uint64_t seed, std::uint64_t stream = 0);

/// lambda * noise + (1 - lambda) * rendered. Noise may be at the rendered
/// resolution or an integer fraction of it (latent); latent noise is
/// nearest-upsampled and its first C channels used.
Image mixInput(const Image &rendered, const Image &noise, double lambda);

/// Nearest upsample of a latent image to (height, width) keeping the first
/// `channels` channels.
Image upsampleNoise(const Image &noise, int height, int width, int channels);

} // namespace snk
