#include "icelut/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "model_detail.hpp"

namespace icelut::engine {

using imaging::ImageF32;
using imaging::ImageU8;
using lutgen::LutBundle;

std::vector<double> lut_weights(const LutBundle& bundle, const ImageU8& working,
                                OpCounter* counter) {
  bundle.validate();
  const int C = bundle.config.channels;
  const int K = bundle.config.groups;
  const int N = bundle.config.basis_count;
  const int V = bundle.quant.index_count();

  imaging::BitPlanePair planes = imaging::split_bitplanes(working);
  const std::size_t pixels = working.pixel_count();

  // per-plane accumulation in FP32, fixed row-major order
  std::vector<float> sum_msb(C, 0.f);
  std::vector<float> sum_lsb(C, 0.f);
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t* hi = planes.msb.data() + p * 3;
    const std::uint8_t* lo = planes.lsb.data() + p * 3;
    const float* row_hi = bundle.msb.entry(hi[0], hi[1], hi[2]);
    const float* row_lo = bundle.lsb.entry(lo[0], lo[1], lo[2]);
    for (int c = 0; c < C; ++c) {
      sum_msb[c] += row_hi[c];
      sum_lsb[c] += row_lo[c];
    }
  }
  if (counter) {
    counter->channel_lookups += 2 * pixels;
    counter->channel_accum_adds += 2 * pixels * static_cast<std::uint64_t>(C);
    counter->adds += 2 * pixels * static_cast<std::uint64_t>(C);
  }

  std::vector<float> pooled(C);
  const float count = static_cast<float>(pixels);
  for (int c = 0; c < C; ++c) {
    pooled[c] = sum_msb[c] / count + sum_lsb[c] / count;
  }
  if (counter) {
    counter->multiplies += 2 * static_cast<std::uint64_t>(C);  // the divides
    counter->adds += static_cast<std::uint64_t>(C);
  }

  // quantize each pooled feature to its table index
  std::vector<int> index(C);
  for (int c = 0; c < C; ++c) {
    const double q = lutgen::quantize_feature(pooled[c], bundle.quant);
    index[c] = lutgen::feature_to_index(q, bundle.quant);
  }
  if (counter) {
    counter->multiplies += 3 * static_cast<std::uint64_t>(C);
    counter->adds += static_cast<std::uint64_t>(C);
  }

  // per-group INT8 rows, integer accumulation
  std::vector<std::int32_t> acc(N, 0);
  for (int k = 0; k < K; ++k) {
    const std::int8_t* row =
        bundle.weights.row(k, index[2 * k], index[2 * k + 1]);
    for (int n = 0; n < N; ++n) {
      acc[n] += row[n];
    }
  }
  if (counter) {
    counter->weight_lookups += static_cast<std::uint64_t>(K);
    counter->adds += static_cast<std::uint64_t>(K) * N;
  }

  std::vector<double> weights(N);
  const float scale = bundle.weights.scale;
  for (int n = 0; n < N; ++n) {
    weights[n] = static_cast<float>(acc[n]) * scale;
  }
  if (counter) {
    counter->multiplies += static_cast<std::uint64_t>(N);
  }
  return weights;
}

namespace {

// fused = sum_n w_n basis_n, FP32
std::vector<float> fuse_lattices(const LutBundle& bundle,
                                 std::span<const double> weights,
                                 OpCounter* counter) {
  const std::size_t count = bundle.basis.front().size();
  std::vector<float> fused(count, 0.f);
  for (std::size_t n = 0; n < bundle.basis.size(); ++n) {
    const float wn = static_cast<float>(weights[n]);
    const float* src = bundle.basis[n].data();
    for (std::size_t i = 0; i < count; ++i) {
      fused[i] += wn * src[i];
    }
  }
  if (counter) {
    counter->interpolation_ops += 2 * bundle.basis.size() * count;
  }
  return fused;
}

void map_rows(const std::vector<float>& fused, int bins, const ImageU8& full,
              ImageU8& out, int row_begin, int row_end) {
  using model::detail::Cell;
  const float* values = fused.data();
  for (int y = row_begin; y < row_end; ++y) {
    const std::uint8_t* src = full.pixel(0, y);
    std::uint8_t* dst = out.pixel(0, y);
    for (int x = 0; x < full.width; ++x) {
      Cell cell = model::detail::cell_of(bins, src[0], src[1], src[2]);
      double w[8];
      std::size_t off[8];
      model::detail::corner_weights(cell, w);
      model::detail::corner_offsets(cell, bins, off);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int v = 0; v < 8; ++v) {
          acc += w[v] * values[off[v] + c];
        }
        double scaled = std::floor(acc * 255.0 + 0.5);  // half-up
        if (scaled < 0.0) scaled = 0.0;
        if (scaled > 255.0) scaled = 255.0;
        dst[c] = static_cast<std::uint8_t>(scaled);
      }
      src += 3;
      dst += 3;
    }
  }
}

ImageU8 apply_lattice(const LutBundle& bundle, const std::vector<float>& fused,
                      const ImageU8& full, OpCounter* counter, int threads) {
  ImageU8 out = ImageU8::create(full.width, full.height);
  if (threads < 2 || full.height < threads) {
    map_rows(fused, bundle.lattice_bins, full, out, 0, full.height);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (full.height + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(full.height, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(map_rows, std::cref(fused), bundle.lattice_bins,
                        std::cref(full), std::ref(out), begin, end);
    }
    for (std::thread& t : pool) t.join();
  }
  if (counter) {
    // per pixel: 6 cell muls + 6 cell subs, 12 weight products + 3
    // complements, 24 MACs across the three channels, 1 scale+round each
    counter->interpolation_ops += full.pixel_count() * 72;
  }
  return out;
}

}  // namespace

ImageU8 retouch(const LutBundle& bundle, const ImageU8& full, int working_size,
                OpCounter* counter, int threads) {
  if (working_size < 1) {
    raise(ErrorCode::InvalidConfig, "working size must be >= 1");
  }
  ImageU8 working = imaging::bilinear_downsample(full, working_size, working_size);
  std::vector<double> weights = lut_weights(bundle, working, counter);
  std::vector<float> fused = fuse_lattices(bundle, weights, counter);
  return apply_lattice(bundle, fused, full, counter, threads);
}

EquivalenceReport verify_equivalence(const model::TrainableModel& trained,
                                     const LutBundle& bundle,
                                     std::span<const ImageU8> images,
                                     int working_size) {
  EquivalenceReport report;
  report.weight_bound =
      bundle.config.groups * static_cast<double>(bundle.weights.scale) / 2.0;
  report.images = static_cast<int>(images.size());

  for (const ImageU8& full : images) {
    ImageU8 working =
        imaging::bilinear_downsample(full, working_size, working_size);

    // table path
    std::vector<double> w_lut = lut_weights(bundle, working, nullptr);
    ImageU8 out_lut = retouch(bundle, full, working_size);

    // network path with the same feature quantization applied
    std::vector<double> pooled = model::pooled_features(trained, working);
    std::vector<double> quantized(pooled.size());
    for (std::size_t c = 0; c < pooled.size(); ++c) {
      quantized[c] = lutgen::quantize_feature(pooled[c], bundle.quant);
    }
    std::vector<double> w_ref = model::predict_weights(trained.head, quantized);
    model::Lattice3D fused = model::fuse_luts(trained.basis, w_ref);
    ImageU8 out_ref =
        imaging::round_to_bytes(model::trilinear_apply(fused, full));

    for (std::size_t n = 0; n < w_ref.size(); ++n) {
      const double dev = std::abs(w_lut[n] - w_ref[n]);
      if (dev > report.max_weight_deviation) {
        report.max_weight_deviation = dev;
      }
    }
    for (std::size_t i = 0; i < out_ref.data.size(); ++i) {
      const int dev = std::abs(static_cast<int>(out_lut.data[i]) -
                               static_cast<int>(out_ref.data[i]));
      if (dev > report.max_pixel_deviation) {
        report.max_pixel_deviation = dev;
      }
    }
  }
  return report;
}

OpCountReport count_ops(const LutBundle& bundle, int working_size, int full_w,
                        int full_h) {
  // deterministic synthetic content; the tally only depends on sizes
  ImageU8 full = ImageU8::create(full_w, full_h);
  for (int y = 0; y < full_h; ++y) {
    for (int x = 0; x < full_w; ++x) {
      std::uint8_t* px = full.pixel(x, y);
      px[0] = static_cast<std::uint8_t>((x * 255) / std::max(1, full_w - 1));
      px[1] = static_cast<std::uint8_t>((y * 255) / std::max(1, full_h - 1));
      px[2] = static_cast<std::uint8_t>((x + y) & 0xff);
    }
  }

  OpCounter counter;
  retouch(bundle, full, working_size, &counter);

  OpCountReport report;
  report.table_lookups = counter.channel_lookups;
  report.weight_table_lookups = counter.weight_lookups;
  report.adds = counter.adds;
  report.multiplies = counter.multiplies;
  report.channel_accum_adds = counter.channel_accum_adds;
  report.weight_stage_arithmetic = counter.adds + counter.multiplies;
  report.interpolation_ops = counter.interpolation_ops;
  return report;
}

BenchReport bench(const LutBundle& bundle, std::span<const ImageU8> images,
                  int repeats, const model::TrainableModel* network,
                  int working_size) {
  if (repeats < 3) {
    raise(ErrorCode::InvalidConfig, "bench needs at least 3 repeats");
  }
  if (images.empty()) {
    raise(ErrorCode::EmptyDataset, "bench needs at least one image");
  }

  std::vector<ImageU8> workings;
  workings.reserve(images.size());
  for (const ImageU8& img : images) {
    workings.push_back(
        imaging::bilinear_downsample(img, working_size, working_size));
  }

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point start) {
    return std::chrono::duration<double, std::milli>(clock::now() - start)
        .count();
  };

  // keep the produced weights alive so the work isn't optimized away
  volatile double sink = 0.0;

  auto run_weight_pass = [&]() {
    auto start = clock::now();
    for (const ImageU8& working : workings) {
      std::vector<double> w = lut_weights(bundle, working, nullptr);
      sink = sink + w[0];
    }
    return ms_since(start);
  };
  auto run_interp_pass = [&](const std::vector<std::vector<double>>& weight_sets,
                             std::vector<ImageU8>& outputs) {
    auto start = clock::now();
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::vector<float> fused = fuse_lattices(bundle, weight_sets[i], nullptr);
      outputs[i] = apply_lattice(bundle, fused, images[i], nullptr, 1);
      sink = sink + outputs[i].data[0];
    }
    return ms_since(start);
  };
  auto run_network_pass = [&]() {
    auto start = clock::now();
    for (const ImageU8& working : workings) {
      std::vector<double> pooled = model::pooled_features(*network, working);
      std::vector<double> w = model::predict_weights(network->head, pooled);
      sink = sink + w[0];
    }
    return ms_since(start);
  };

  std::vector<std::vector<double>> weight_sets;
  for (const ImageU8& working : workings) {
    weight_sets.push_back(lut_weights(bundle, working, nullptr));
  }
  std::vector<ImageU8> outputs(images.size());

  // warmup
  run_weight_pass();
  run_interp_pass(weight_sets, outputs);
  if (network) run_network_pass();

  std::vector<double> weight_ms, interp_ms, network_ms;
  for (int r = 0; r < repeats; ++r) {
    weight_ms.push_back(run_weight_pass());
    interp_ms.push_back(run_interp_pass(weight_sets, outputs));
    if (network) network_ms.push_back(run_network_pass());
  }

  const double per_image = static_cast<double>(images.size());
  auto stats = [&](std::vector<double>& samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    StageStats s;
    s.median_ms = samples[n / 2] / per_image;
    s.p10_ms = samples[(n - 1) / 10] / per_image;
    s.p90_ms = samples[((n - 1) * 9) / 10] / per_image;
    return s;
  };

  BenchReport report;
  report.images = static_cast<int>(images.size());
  report.repeats = repeats;
  report.weight_stage = stats(weight_ms);
  report.interpolation_stage = stats(interp_ms);
  if (network) {
    report.network_weight_stage = stats(network_ms);
  }
  return report;
}

}  // namespace icelut::engine
