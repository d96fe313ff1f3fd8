// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/geo/field_sample.hpp"

namespace pdegen::pipeline {

inline geo::FieldSample normalize_sample(const geo::FieldSample& s, const geo::ChannelStats& stats) {
    if (static_cast<int>(stats.mean.size()) != s.channels)
        throw DataError("normalize: stats channel count mismatch");
    geo::FieldSample out = s;
    out.stats = stats;
    const int c = s.channels;
    for (size_t i = 0; i < out.values.size(); ++i) {
        const size_t ch = i % static_cast<size_t>(c);
        out.values[i] = float((double(out.values[i]) - stats.mean[ch]) / stats.stddev[ch]);
    }
    return out;
}

inline geo::FieldSample denormalize_sample(const geo::FieldSample& s, const geo::ChannelStats& stats) {
    geo::FieldSample out = s;
    const int c = s.channels;
    for (size_t i = 0; i < out.values.size(); ++i) {
        const size_t ch = i % static_cast<size_t>(c);
        out.values[i] = float(double(out.values[i]) * stats.stddev[ch] + stats.mean[ch]);
    }
    return out;
}

}  // namespace pdegen::pipeline
