// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/schedule.h"

#include "snk/rng.h"

#include <algorithm>
#include <cmath>

namespace snk {

namespace {

constexpr std::uint64_t kLambdaTag = 0x1a3bda;

nlohmann::json
rangeJson(const NoiseRange &r) {
    return nlohmann::json::array({r.lo, r.hi});
}

NoiseRange
readRange(const nlohmann::json &j) {
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

NoiseRange
ScheduleStage::rangeAt(int epoch) const {
    if (!annealed()) {
        return startRange;
    }
    const double t = double(epoch - (first - 1)) / double(last - (first - 1));
    // Exact at both ends, so consecutive stages join without a rounding step.
    return {(1.0 - t) * startRange.lo + t * endRange.lo, (1.0 - t) * startRange.hi + t * endRange.hi};
}

bool
ScheduleStage::isTrainStep(int epoch) const {
    const int cycle = generationSteps + trainSteps;
    const int phase = ((epoch - cycleOrigin) % cycle + cycle) % cycle;
    return phase >= generationSteps;
}

DistillSchedule::DistillSchedule(std::vector<ScheduleStage> stages) : mStages(std::move(stages)) {
    check(!mStages.empty(), "schedule needs at least one stage");
    for (std::size_t i = 0; i < mStages.size(); ++i) {
        const auto &s = mStages[i];
        check(s.first <= s.last, "stage '" + s.name + "' has an empty epoch range");
        check(i == 0 || s.first == mStages[i - 1].last + 1, "schedule stages must be contiguous");
        for (const auto &r: {s.startRange, s.endRange}) {
            check(0.0 <= r.lo && r.lo <= r.hi && r.hi <= 1.0, "stage '" + s.name + "' noise range outside [0, 1]");
        }
        check(s.generationSteps >= 0 && s.trainSteps >= 0 && s.generationSteps + s.trainSteps > 0,
              "stage '" + s.name + "' needs a positive step cycle");
    }
}

DistillSchedule
DistillSchedule::standard() {
    return scaled(1600);
}

DistillSchedule
DistillSchedule::scaled(int totalEpochs) {
    constexpr int kStandardEnds[] = {50, 150, 200, 500, 600, 1500, 1600};
    check(totalEpochs >= 7, "scaled schedule needs at least one epoch per stage");
    int ends[7];
    for (int i = 0; i < 7; ++i) {
        ends[i] = int(std::lround(double(kStandardEnds[i]) * totalEpochs / 1600.0));
        ends[i] = std::max(ends[i], i == 0 ? 1 : ends[i - 1] + 1);
    }
    ends[6] = totalEpochs;
    for (int i = 5; i >= 0; --i) {
        ends[i] = std::min(ends[i], ends[i + 1] - 1);
    }
    const NoiseRange full{1.0, 1.0};
    const NoiseRange high{0.7, 1.0};
    const NoiseRange low{0.1, 0.4};
    const int distillStart = ends[2] + 1;
    auto stage = [&](const char *name, int i, NoiseRange a, NoiseRange b, bool distill) {
        ScheduleStage s;
        s.name            = name;
        s.first           = i == 0 ? 1 : ends[i - 1] + 1;
        s.last            = ends[i];
        s.startRange      = a;
        s.endRange        = b;
        s.generationSteps = distill ? 3 : 0;
        s.trainSteps      = 1;
        s.cycleOrigin     = distill ? distillStart : 1;
        s.fitterActive    = distill;
        return s;
    };
    return DistillSchedule({stage("early-bootstrap", 0, full, full, false), stage("bootstrap", 1, full, full, false),
                            stage("warm-up", 2, full, full, false), stage("full-noise", 3, full, full, true),
                            stage("pre-anneal", 4, high, high, true), stage("anneal", 5, high, low, true),
                            stage("ending", 6, low, low, true)});
}

const ScheduleStage &
DistillSchedule::stageAt(int epoch) const {
    check(!mStages.empty(), "empty schedule");
    if (epoch < firstEpoch() || epoch > lastEpoch()) {
        throw Error("epoch out of range");
    }
    return *std::ranges::lower_bound(mStages, epoch, {}, &ScheduleStage::last);
}

nlohmann::json
DistillSchedule::toJson() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto &s: mStages) {
        stages.push_back({{"name", s.name},
                          {"first", s.first},
                          {"last", s.last},
                          {"range_start", rangeJson(s.startRange)},
                          {"range_end", rangeJson(s.endRange)},
                          {"generation_steps", s.generationSteps},
                          {"train_steps", s.trainSteps},
                          {"cycle_origin", s.cycleOrigin},
                          {"fitter_active", s.fitterActive}});
    }
    return {{"stages", stages}};
}

DistillSchedule
DistillSchedule::fromJson(const nlohmann::json &j) {
    if (j.contains("total_epochs")) {
        return scaled(j.at("total_epochs").get<int>());
    }
    try {
        std::vector<ScheduleStage> stages;
        for (const auto &s: j.at("stages")) {
            ScheduleStage st;
            st.name            = s.value("name", "");
            st.first           = s.at("first").get<int>();
            st.last            = s.at("last").get<int>();
            st.startRange      = readRange(s.at("range_start"));
            st.endRange        = s.contains("range_end") ? readRange(s.at("range_end")) : st.startRange;
            st.generationSteps = s.value("generation_steps", 0);
            st.trainSteps      = s.value("train_steps", 1);
            st.cycleOrigin     = s.value("cycle_origin", st.first);
            st.fitterActive    = s.value("fitter_active", true);
            stages.push_back(std::move(st));
        }
        return DistillSchedule(std::move(stages));
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("malformed schedule: ") + e.what());
    }
}

NoiseRange
noiseRangeAt(const DistillSchedule &schedule, int epoch) {
    return schedule.stageAt(epoch).rangeAt(epoch);
}

double
noiseLevelVariate(std::uint64_t seed, int epoch, std::uint64_t stream) {
    CounterRng rng(seed, {kLambdaTag, std::uint64_t(std::int64_t(epoch)), stream});
    return rng.uniform();
}

double
noiseLevelAt(const DistillSchedule &schedule, int epoch, std::uint64_t seed, std::uint64_t stream) {
    const NoiseRange r = noiseRangeAt(schedule, epoch);
    return r.lo + noiseLevelVariate(seed, epoch, stream) * (r.hi - r.lo);
}

Image
upsampleNoise(const Image &noise, int height, int width, int channels) {
    check(channels <= noise.channels(), "noise has too few channels");
    check(height % noise.height() == 0 && width % noise.width() == 0 && height / noise.height() == width / noise.width(),
          "noise resolution must divide the target resolution by a common integer factor");
    const int s = height / noise.height();
    Image out(height, width, channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                out.at(y, x, c) = noise.at(y / s, x / s, c);
            }
        }
    }
    return out;
}

Image
mixInput(const Image &rendered, const Image &noise, double lambda) {
    check(lambda >= 0.0 && lambda <= 1.0, "noise level must lie in [0, 1]");
    Image n;
    if (noise.height() == rendered.height() && noise.width() == rendered.width()) {
        if (noise.channels() != rendered.channels()) {
            throw Error("mix: noise and rendered channel counts differ");
        }
        n = noise;
    } else {
        if (noise.empty() || rendered.height() % noise.height() != 0 || rendered.width() % noise.width() != 0 ||
            noise.channels() < rendered.channels()) {
            throw Error("mix: noise shape incompatible with rendered image");
        }
        n = upsampleNoise(noise, rendered.height(), rendered.width(), rendered.channels());
    }
    Image out(rendered.height(), rendered.width(), rendered.channels());
    const auto r = rendered.data();
    const auto z = n.data();
    auto o       = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = float(lambda * z[i] + (1.0 - lambda) * r[i]);
    }
    return out;
}

} // namespace snk
