#include "crowdsd/detector.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr int kMinImageSide = 8;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Volume zero_padded(const Volume& in) {
  Volume out{in.channels, in.rows + 2, in.cols + 2, {}};
  out.data.assign(static_cast<std::size_t>(out.channels) * out.rows * out.cols, 0.0);
  for (int c = 0; c < in.channels; ++c) {
    for (int r = 0; r < in.rows; ++r) {
      const double* src = in.data.data() + (static_cast<std::size_t>(c) * in.rows + r) * in.cols;
      double* dst =
          out.data.data() + (static_cast<std::size_t>(c) * out.rows + r + 1) * out.cols + 1;
      std::memcpy(dst, src, sizeof(double) * static_cast<std::size_t>(in.cols));
    }
  }
  return out;
}

// 3x3 convolution over a zero-padded input; ReLU applied in place.
Volume conv3x3_forward(const ConvLayer& layer, const double* params, const Volume& padded) {
  const int s = layer.stride;
  const int rows = (padded.rows - 2) / s;
  const int cols = (padded.cols - 2) / s;
  Volume out{layer.out, rows, cols, {}};
  out.data.assign(static_cast<std::size_t>(layer.out) * rows * cols, 0.0);
  const double* w = params + layer.weight;
  const double* b = params + layer.bias;
  const std::size_t plane = static_cast<std::size_t>(padded.rows) * padded.cols;

  for (int oc = 0; oc < layer.out; ++oc) {
    for (int y = 0; y < rows; ++y) {
      double* o = out.data.data() + (static_cast<std::size_t>(oc) * rows + y) * cols;
      for (int x = 0; x < cols; ++x) o[x] = b[oc];
      for (int ic = 0; ic < layer.in; ++ic) {
        const double* wk = w + (static_cast<std::size_t>(oc) * layer.in + ic) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const double* p = padded.data.data() + ic * plane +
                            static_cast<std::size_t>(s * y + ky) * padded.cols;
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = wk[ky * 3 + kx];
            if (s == 1) {
              const double* pk = p + kx;
#pragma omp simd
              for (int x = 0; x < cols; ++x) o[x] += wv * pk[x];
            } else {
              for (int x = 0; x < cols; ++x) o[x] += wv * p[s * x + kx];
            }
          }
        }
      }
      for (int x = 0; x < cols; ++x) o[x] = o[x] > 0.0 ? o[x] : 0.0;
    }
  }
  return out;
}

// Back-propagates `gout` (gradient w.r.t. the pre-activation output) into
// weight/bias gradients and, when `gpad` is given, the padded input.
void conv3x3_backward(const ConvLayer& layer, const double* params, const Volume& padded,
                      const std::vector<double>& gout, int rows, int cols, double* grads,
                      std::vector<double>* gpad) {
  const int s = layer.stride;
  const double* w = params + layer.weight;
  double* gw = grads + layer.weight;
  double* gb = grads + layer.bias;
  const std::size_t plane = static_cast<std::size_t>(padded.rows) * padded.cols;

  for (int oc = 0; oc < layer.out; ++oc) {
    for (int y = 0; y < rows; ++y) {
      const double* g = gout.data() + (static_cast<std::size_t>(oc) * rows + y) * cols;
      double bsum = 0.0;
#pragma omp simd reduction(+ : bsum)
      for (int x = 0; x < cols; ++x) bsum += g[x];
      gb[oc] += bsum;
      for (int ic = 0; ic < layer.in; ++ic) {
        const std::size_t wbase = (static_cast<std::size_t>(oc) * layer.in + ic) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const std::size_t row_off = ic * plane + static_cast<std::size_t>(s * y + ky) * padded.cols;
          const double* p = padded.data.data() + row_off;
          double* gp = gpad ? gpad->data() + row_off : nullptr;
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = w[wbase + ky * 3 + kx];
            double acc = 0.0;
            if (s == 1) {
              const double* pk = p + kx;
#pragma omp simd reduction(+ : acc)
              for (int x = 0; x < cols; ++x) acc += g[x] * pk[x];
              if (gp) {
                double* gpk = gp + kx;
#pragma omp simd
                for (int x = 0; x < cols; ++x) gpk[x] += wv * g[x];
              }
            } else {
              for (int x = 0; x < cols; ++x) acc += g[x] * p[s * x + kx];
              if (gp) {
                for (int x = 0; x < cols; ++x) gp[s * x + kx] += wv * g[x];
              }
            }
            gw[wbase + ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
}

// 1x1 head: one output map per output channel, before any squashing.
std::vector<Grid> head_forward(const ConvLayer& layer, const double* params, const Volume& f) {
  std::vector<Grid> out;
  const std::size_t plane = static_cast<std::size_t>(f.rows) * f.cols;
  for (int oc = 0; oc < layer.out; ++oc) {
    Grid z(f.rows, f.cols, params[layer.bias + oc]);
    double* zd = z.data();
    for (int c = 0; c < f.channels; ++c) {
      const double wv = params[layer.weight + static_cast<std::size_t>(oc) * layer.in + c];
      const double* fc = f.data.data() + c * plane;
#pragma omp simd
      for (std::size_t i = 0; i < plane; ++i) zd[i] += wv * fc[i];
    }
    out.push_back(std::move(z));
  }
  return out;
}

void head_backward(const ConvLayer& layer, const double* params, const Volume& f, int oc,
                   const Grid& gz, double* grads, std::vector<double>& gf) {
  const std::size_t plane = static_cast<std::size_t>(f.rows) * f.cols;
  const double* g = gz.data();
  double bsum = 0.0;
#pragma omp simd reduction(+ : bsum)
  for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
  grads[layer.bias + oc] += bsum;
  for (int c = 0; c < f.channels; ++c) {
    const std::size_t widx = layer.weight + static_cast<std::size_t>(oc) * layer.in + c;
    const double wv = params[widx];
    const double* fc = f.data.data() + c * plane;
    double* gfc = gf.data() + c * plane;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < plane; ++i) {
      acc += g[i] * fc[i];
      gfc[i] += wv * g[i];
    }
    grads[widx] += acc;
  }
}

void check_image(const Grid& image, int stride) {
  if (image.rows() < kMinImageSide || image.cols() < kMinImageSide) {
    throw BadShape("detector input must be at least 8x8");
  }
  if (image.rows() % stride != 0 || image.cols() % stride != 0) {
    throw BadShape("detector input dimensions must be divisible by the output stride");
  }
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint");
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("truncated checkpoint");
  return v;
}

constexpr char kMagic[8] = {'C', 'S', 'D', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

std::size_t TensorInfo::count() const noexcept {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

ConvLayer DetectorParams::add_layer(const std::string& name, int in, int out, int kernel,
                                    int layer_stride) {
  ConvLayer layer{in, out, kernel, layer_stride, values_.size(), 0};
  TensorInfo w{name + ".weight", {out, in, kernel, kernel}, values_.size()};
  values_.resize(values_.size() + w.count(), 0.0);
  layer.bias = values_.size();
  TensorInfo b{name + ".bias", {out}, values_.size()};
  values_.resize(values_.size() + b.count(), 0.0);
  manifest_.push_back(std::move(w));
  manifest_.push_back(std::move(b));
  return layer;
}

DetectorParams DetectorParams::layout(int stride) {
  if (stride != 1 && stride != 4) throw ConfigError("detector stride must be 1 or 4");
  DetectorParams p;
  p.stride_ = stride;
  p.trunk_.push_back(p.add_layer("conv1", 1, 8, 3, 1));
  p.trunk_.push_back(p.add_layer("conv2", 8, 16, 3, 1));
  p.trunk_.push_back(p.add_layer("conv3", 16, 16, 3, 1));
  if (stride == 4) {
    p.trunk_.push_back(p.add_layer("down1", 16, 16, 3, 2));
    p.trunk_.push_back(p.add_layer("down2", 16, 16, 3, 2));
  }
  p.center_head_ = p.add_layer("center", 16, 1, 1, 1);
  p.size_head_ = p.add_layer("size", 16, 1, 1, 1);
  if (stride == 4) p.offset_head_ = p.add_layer("offset", 16, 2, 1, 1);
  return p;
}

DetectorParams DetectorParams::zeros(int stride) { return layout(stride); }

DetectorParams DetectorParams::create(int stride, std::uint64_t seed) {
  DetectorParams p = layout(stride);
  p.seed_ = seed;
  std::mt19937_64 rng(seed);
  auto init = [&](const ConvLayer& layer) {
    const double fan_in = static_cast<double>(layer.in * layer.kernel * layer.kernel);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    const std::size_t n = static_cast<std::size_t>(layer.out) * layer.in * layer.kernel * layer.kernel;
    for (std::size_t i = 0; i < n; ++i) p.values_[layer.weight + i] = dist(rng);
  };
  for (const auto& layer : p.trunk_) init(layer);
  init(p.center_head_);
  init(p.size_head_);
  if (p.offset_head_) init(*p.offset_head_);
  p.values_[p.center_head_.bias] = std::log(0.01 / 0.99);
  return p;
}

void DetectorParams::set_size_bias(double log_size) {
  values_[size_head_.bias] = log_size;
  touch();
}

DetectorParams DetectorParams::from_parts(int stride, std::uint64_t seed,
                                          const std::vector<TensorInfo>& manifest,
                                          std::vector<double> values) {
  DetectorParams p = layout(stride);
  if (manifest != p.manifest_) throw ShapeMismatch("checkpoint manifest does not match the detector");
  if (values.size() != p.values_.size()) throw ShapeMismatch("checkpoint parameter count mismatch");
  p.seed_ = seed;
  p.values_ = std::move(values);
  return p;
}

ForwardResult forward(const DetectorParams& params, const Grid& image) {
  check_image(image, params.stride());
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.version = params.version();
  cache.stride = params.stride();
  cache.param_count = params.count();

  Volume x{1, image.rows(), image.cols(),
           std::vector<double>(image.values().begin(), image.values().end())};
  const double* w = params.values().data();
  for (const ConvLayer& layer : params.trunk()) {
    cache.padded_inputs.push_back(zero_padded(x));
    x = conv3x3_forward(layer, w, cache.padded_inputs.back());
    cache.outputs.push_back(x);
  }
  const Volume& features = cache.outputs.back();

  Predictions& pred = result.predictions;
  pred.heatmap = std::move(head_forward(params.center_head(), w, features)[0]);
  for (double& v : pred.heatmap.values()) v = sigmoid(v);
  pred.size_map = std::move(head_forward(params.size_head(), w, features)[0]);
  if (params.offset_head()) {
    auto maps = head_forward(*params.offset_head(), w, features);
    for (auto& m : maps) {
      for (double& v : m.values()) v = sigmoid(v);
    }
    pred.offset = OffsetMap{std::move(maps[0]), std::move(maps[1])};
  }
  return result;
}

std::vector<double> backward(const DetectorParams& params, const ForwardCache& cache,
                             const PredictionGrads& grads) {
  if (cache.version != params.version() || cache.stride != params.stride() ||
      cache.param_count != params.count() || cache.outputs.size() != params.trunk().size()) {
    throw StaleCache("forward cache does not belong to these parameters");
  }
  const Volume& features = cache.outputs.back();
  const int rows = features.rows;
  const int cols = features.cols;
  if (grads.heatmap.rows() != rows || grads.heatmap.cols() != cols ||
      grads.size_map.rows() != rows || grads.size_map.cols() != cols) {
    throw ShapeMismatch("prediction gradients do not match the output grid");
  }

  std::vector<double> out(params.count(), 0.0);
  const double* w = params.values().data();
  std::vector<double> gf(static_cast<std::size_t>(features.channels) * rows * cols, 0.0);

  // Heads: recompute squashed outputs from cached features.
  {
    const Grid q = head_forward(params.center_head(), w, features)[0];
    Grid gz(rows, cols, 0.0);
    for (std::size_t i = 0; i < gz.size(); ++i) {
      const double s = sigmoid(q[i]);
      gz[i] = grads.heatmap[i] * s * (1.0 - s);
    }
    head_backward(params.center_head(), w, features, 0, gz, out.data(), gf);
  }
  head_backward(params.size_head(), w, features, 0, grads.size_map, out.data(), gf);
  if (params.offset_head()) {
    if (!grads.offset) throw ShapeMismatch("offset gradients required at stride 4");
    const auto z = head_forward(*params.offset_head(), w, features);
    const Grid* g[2] = {&grads.offset->dx, &grads.offset->dy};
    for (int ch = 0; ch < 2; ++ch) {
      if (!g[ch]->same_shape(z[ch])) throw ShapeMismatch("offset gradient shape mismatch");
      Grid gz(rows, cols, 0.0);
      for (std::size_t i = 0; i < gz.size(); ++i) {
        const double s = sigmoid(z[ch][i]);
        gz[i] = (*g[ch])[i] * s * (1.0 - s);
      }
      head_backward(*params.offset_head(), w, features, ch, gz, out.data(), gf);
    }
  }

  // Trunk, last layer first. `gf` holds d loss / d post-ReLU output.
  for (std::size_t li = params.trunk().size(); li-- > 0;) {
    const ConvLayer& layer = params.trunk()[li];
    const Volume& y = cache.outputs[li];
    for (std::size_t i = 0; i < gf.size(); ++i) {
      if (!(y.data[i] > 0.0)) gf[i] = 0.0;
    }
    const Volume& padded = cache.padded_inputs[li];
    if (li == 0) {
      conv3x3_backward(layer, w, padded, gf, y.rows, y.cols, out.data(), nullptr);
      break;
    }
    std::vector<double> gpad(padded.data.size(), 0.0);
    conv3x3_backward(layer, w, padded, gf, y.rows, y.cols, out.data(), &gpad);
    const Volume& x = cache.outputs[li - 1];
    gf.assign(x.data.size(), 0.0);
    for (int c = 0; c < x.channels; ++c) {
      for (int r = 0; r < x.rows; ++r) {
        const double* src =
            gpad.data() + (static_cast<std::size_t>(c) * padded.rows + r + 1) * padded.cols + 1;
        double* dst = gf.data() + (static_cast<std::size_t>(c) * x.rows + r) * x.cols;
        std::memcpy(dst, src, sizeof(double) * static_cast<std::size_t>(x.cols));
      }
    }
  }
  return out;
}

AdamState AdamState::for_params(const DetectorParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.m.assign(params.count(), 0.0);
  s.v.assign(params.count(), 0.0);
  return s;
}

void adam_step(DetectorParams& params, const std::vector<double>& grads, AdamState& state) {
  const std::size_t n = params.count();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeMismatch("optimizer state does not match the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto& w = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
  params.touch();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  const DetectorParams& p = ckpt.params;
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, static_cast<std::uint32_t>(p.stride()));
  write_pod(os, static_cast<std::uint64_t>(p.seed()));
  write_pod(os, static_cast<std::int64_t>(ckpt.epoch));
  write_pod(os, static_cast<std::uint32_t>(p.manifest().size()));
  for (const TensorInfo& t : p.manifest()) {
    write_pod(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod(os, static_cast<std::uint32_t>(d));
    write_pod(os, static_cast<std::uint64_t>(t.offset));
  }
  write_pod(os, static_cast<std::uint64_t>(p.count()));
  write_doubles(os, p.values());
  write_pod(os, static_cast<std::uint8_t>(ckpt.optimizer ? 1 : 0));
  if (ckpt.optimizer) {
    const AdamState& s = *ckpt.optimizer;
    write_pod(os, static_cast<std::int64_t>(s.step));
    write_pod(os, s.learning_rate);
    write_pod(os, s.beta1);
    write_pod(os, s.beta2);
    write_pod(os, s.epsilon);
    write_doubles(os, s.m);
    write_doubles(os, s.v);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a detector checkpoint: " + path.string());
  }
  if (read_pod<std::uint32_t>(is) != kFormatVersion) throw IoError("unsupported checkpoint version");
  const auto stride = static_cast<int>(read_pod<std::uint32_t>(is));
  const auto seed = read_pod<std::uint64_t>(is);
  const auto epoch = read_pod<std::int64_t>(is);
  const auto tensors = read_pod<std::uint32_t>(is);
  std::vector<TensorInfo> manifest;
  for (std::uint32_t t = 0; t < tensors; ++t) {
    TensorInfo info;
    info.name.resize(read_pod<std::uint32_t>(is));
    is.read(info.name.data(), static_cast<std::streamsize>(info.name.size()));
    const auto rank = read_pod<std::uint32_t>(is);
    for (std::uint32_t d = 0; d < rank; ++d) {
      info.shape.push_back(static_cast<int>(read_pod<std::uint32_t>(is)));
    }
    info.offset = read_pod<std::uint64_t>(is);
    manifest.push_back(std::move(info));
  }
  const auto n = read_pod<std::uint64_t>(is);
  Checkpoint ckpt;
  ckpt.params = DetectorParams::from_parts(stride, seed, manifest, read_doubles(is, n));
  ckpt.epoch = epoch;
  if (read_pod<std::uint8_t>(is) != 0) {
    AdamState s;
    s.step = read_pod<std::int64_t>(is);
    s.learning_rate = read_pod<double>(is);
    s.beta1 = read_pod<double>(is);
    s.beta2 = read_pod<double>(is);
    s.epsilon = read_pod<double>(is);
    s.m = read_doubles(is, n);
    s.v = read_doubles(is, n);
    ckpt.optimizer = std::move(s);
  }
  return ckpt;
}

}  // namespace crowdsd
