#include "vbridge/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include "binio.hpp"

namespace vbridge {
namespace {

struct ConvSpec {
  int weight = -1;
  int bias = -1;
  int cin = 0;
  int cout = 0;
  int kernel = 1;
  int dilation = 1;
  int stride = 1;
};

struct BlockSpec {
  ConvSpec conv1;
  ConvSpec conv2;
};

struct FilmSpec {
  ConvSpec scale;
  ConvSpec shift;
};

struct TensorShape {
  std::string name;
  int rows;
  int cols;
  int fan_in;
  bool zero_init;
};

struct Layout {
  ConvSpec temb1, temb2, in, out;
  std::vector<std::vector<BlockSpec>> enc, dec;
  std::vector<ConvSpec> down, up, merge;
  std::vector<FilmSpec> film;
  std::vector<TensorShape> shapes;

  ConvSpec add_conv(const std::string& name, int cin, int cout, int kernel,
                    int dilation = 1, int stride = 1, bool zero_weight = false) {
    ConvSpec spec;
    spec.cin = cin;
    spec.cout = cout;
    spec.kernel = kernel;
    spec.dilation = dilation;
    spec.stride = stride;
    spec.weight = static_cast<int>(shapes.size());
    shapes.push_back({name + ".w", cout, cin * kernel, cin * kernel, zero_weight});
    spec.bias = static_cast<int>(shapes.size());
    shapes.push_back({name + ".b", cout, 1, 0, true});
    return spec;
  }

  BlockSpec add_block(const std::string& name, int width, int dilation, int kernel) {
    BlockSpec block;
    block.conv1 = add_conv(name + ".conv1", width, width, kernel, dilation);
    block.conv2 = add_conv(name + ".conv2", width, width, 1);
    return block;
  }

  FilmSpec add_film(const std::string& name, int hidden, int width) {
    FilmSpec film;
    film.scale = add_conv(name + ".scale", hidden, width, 1);
    film.shift = add_conv(name + ".shift", hidden, width, 1, 1, 1, true);
    return film;
  }
};

Layout make_layout(const DenoiserConfig& config) {
  config.validate();
  Layout layout;
  const int n = config.num_levels;
  const int k = config.kernel_size;
  const int hidden = config.time_hidden;
  layout.temb1 = layout.add_conv("temb.fc1", config.time_embed_dim, hidden, 1);
  layout.temb2 = layout.add_conv("temb.fc2", hidden, hidden, 1);
  layout.in = layout.add_conv("in", config.in_channels(), config.width(0), k);
  layout.enc.resize(static_cast<size_t>(n));
  layout.dec.resize(static_cast<size_t>(n));
  layout.film.resize(static_cast<size_t>(n));
  layout.up.resize(static_cast<size_t>(n));
  layout.merge.resize(static_cast<size_t>(n));
  for (int l = 0; l < n; ++l) {
    const std::string prefix = "enc" + std::to_string(l);
    for (int b = 0; b < config.blocks_per_level; ++b) {
      layout.enc[l].push_back(layout.add_block(
          prefix + ".block" + std::to_string(b), config.width(l), 1 << b, k));
    }
    if (l + 1 < n) {
      layout.down.push_back(layout.add_conv(prefix + ".down", config.width(l),
                                            config.width(l + 1), 2, 1, 2));
    }
  }
  for (int l = n - 1; l >= 0; --l) {
    const std::string prefix = "dec" + std::to_string(l);
    if (l + 1 < n) {
      layout.up[l] = layout.add_conv(prefix + ".up", config.width(l + 1),
                                     config.width(l), k);
      layout.merge[l] = layout.add_conv(prefix + ".merge", 2 * config.width(l),
                                        config.width(l), 1);
    }
    layout.film[l] = layout.add_film(prefix + ".film", hidden, config.width(l));
    for (int b = 0; b < config.blocks_per_level; ++b) {
      layout.dec[l].push_back(layout.add_block(
          prefix + ".block" + std::to_string(b), config.width(l), 1 << b, k));
    }
  }
  layout.out = layout.add_conv("out", config.width(0), config.latent_channels, k);
  return layout;
}

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Mat<Scalar> silu(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return v / (Scalar(1) + std::exp(-v)); });
}

template <typename Scalar>
Mat<Scalar> silu_grad(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
  return x.binaryExpr(dy, [](Scalar v, Scalar g) {
    const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-v));
    return g * s * (Scalar(1) + v * (Scalar(1) - s));
  });
}

// Walks the network once forward, recording what the reverse pass needs.
template <typename Scalar>
class ForwardWalk {
 public:
  ForwardWalk(const DenoiserParams<Scalar>& params, ForwardTrace<Scalar>* trace)
      : params_(params), trace_(trace) {}

  Mat<Scalar> conv(const ConvSpec& spec, const Mat<Scalar>& x) {
    Mat<Scalar> col = im2col(spec, x);
    const auto& w = params_.tensors()[spec.weight].value;
    const auto& b = params_.tensors()[spec.bias].value;
    Mat<Scalar> y = w * col;
    y.colwise() += b.col(0);
    if (trace_) trace_->cols.push_back(std::move(col));
    return y;
  }

  Mat<Scalar> act(const Mat<Scalar>& x) {
    if (trace_) trace_->pre.push_back(x);
    return silu(x);
  }

  void keep(const Mat<Scalar>& x) {
    if (trace_) trace_->pre.push_back(x);
  }

  Mat<Scalar> block(const BlockSpec& spec, const Mat<Scalar>& h) {
    Mat<Scalar> c1 = conv(spec.conv1, act(h));
    Mat<Scalar> c2 = conv(spec.conv2, act(c1));
    return h + c2;
  }

  static Mat<Scalar> im2col(const ConvSpec& spec, const Mat<Scalar>& x) {
    const Eigen::Index cin = spec.cin;
    if (x.rows() != cin) throw ShapeError("conv: input channel mismatch");
    if (spec.stride == 2) {
      // kernel 2, stride 2: column-major storage already interleaves taps.
      return Eigen::Map<const Mat<Scalar>>(x.data(), 2 * cin, x.cols() / 2);
    }
    const Eigen::Index frames = x.cols();
    const int pad = spec.dilation * (spec.kernel - 1) / 2;
    Mat<Scalar> col = Mat<Scalar>::Zero(cin * spec.kernel, frames);
    for (int k = 0; k < spec.kernel; ++k) {
      const Eigen::Index offset = k * spec.dilation - pad;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -offset);
      const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - offset);
      if (hi > lo) {
        col.block(k * cin, lo, cin, hi - lo) = x.block(0, lo + offset, cin, hi - lo);
      }
    }
    return col;
  }

 private:
  const DenoiserParams<Scalar>& params_;
  ForwardTrace<Scalar>* trace_;
};

// Mirrors ForwardWalk in reverse, consuming the trace from the back.
template <typename Scalar>
class ReverseWalk {
 public:
  ReverseWalk(const DenoiserParams<Scalar>& params, const ForwardTrace<Scalar>& trace,
              DenoiserParams<Scalar>& grads)
      : params_(params),
        trace_(trace),
        grads_(grads),
        col_(trace.cols.size()),
        pre_(trace.pre.size()) {}

  Mat<Scalar> conv(const ConvSpec& spec, const Mat<Scalar>& dy) {
    const Mat<Scalar>& col = trace_.cols.at(--col_);
    grads_.tensors()[spec.weight].value.noalias() += dy * col.transpose();
    grads_.tensors()[spec.bias].value.col(0) += dy.rowwise().sum();
    const Mat<Scalar> dcol =
        params_.tensors()[spec.weight].value.transpose() * dy;
    return col2im(spec, dcol);
  }

  Mat<Scalar> act(const Mat<Scalar>& dy) { return silu_grad(take(), dy); }

  const Mat<Scalar>& take() { return trace_.pre.at(--pre_); }

  Mat<Scalar> block(const BlockSpec& spec, const Mat<Scalar>& dout) {
    Mat<Scalar> da2 = conv(spec.conv2, dout);
    Mat<Scalar> dc1 = act(da2);
    Mat<Scalar> da1 = conv(spec.conv1, dc1);
    return dout + act(da1);
  }

  bool exhausted() const { return col_ == 0 && pre_ == 0; }

 private:
  static Mat<Scalar> col2im(const ConvSpec& spec, const Mat<Scalar>& dcol) {
    const Eigen::Index cin = spec.cin;
    if (spec.stride == 2) {
      return Eigen::Map<const Mat<Scalar>>(dcol.data(), cin, dcol.cols() * 2);
    }
    const Eigen::Index frames = dcol.cols();
    const int pad = spec.dilation * (spec.kernel - 1) / 2;
    Mat<Scalar> dx = Mat<Scalar>::Zero(cin, frames);
    for (int k = 0; k < spec.kernel; ++k) {
      const Eigen::Index offset = k * spec.dilation - pad;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -offset);
      const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - offset);
      if (hi > lo) {
        dx.block(0, lo + offset, cin, hi - lo) += dcol.block(k * cin, lo, cin, hi - lo);
      }
    }
    return dx;
  }

  const DenoiserParams<Scalar>& params_;
  const ForwardTrace<Scalar>& trace_;
  DenoiserParams<Scalar>& grads_;
  std::size_t col_;
  std::size_t pre_;
};

template <typename Scalar>
Mat<Scalar> upsample2(const Mat<Scalar>& x) {
  Mat<Scalar> y(x.rows(), x.cols() * 2);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    y.col(2 * j) = x.col(j);
    y.col(2 * j + 1) = x.col(j);
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> upsample2_grad(const Mat<Scalar>& dy) {
  Mat<Scalar> dx(dy.rows(), dy.cols() / 2);
  for (Eigen::Index j = 0; j < dx.cols(); ++j) {
    dx.col(j) = dy.col(2 * j) + dy.col(2 * j + 1);
  }
  return dx;
}

// Layouts are small; rebuilding per call keeps the params type free of
// private layout state.
const Layout& cached_layout(const DenoiserConfig& config) {
  thread_local DenoiserConfig last_config;
  thread_local Layout last_layout;
  thread_local bool valid = false;
  if (!valid || !(last_config == config)) {
    last_layout = make_layout(config);
    last_config = config;
    valid = true;
  }
  return last_layout;
}

}  // namespace

void DenoiserConfig::validate() const {
  if (latent_channels < 1 || base_width < 1 || num_levels < 1 ||
      time_embed_dim < 2 || time_hidden < 1 || blocks_per_level < 0 ||
      kernel_size < 1) {
    throw DomainError("denoiser config: sizes must be positive");
  }
  if (time_embed_dim % 2 != 0) {
    throw DomainError("denoiser config: time_embed_dim must be even");
  }
  if (kernel_size % 2 != 1) {
    throw DomainError("denoiser config: kernel_size must be odd");
  }
  if (num_levels > 12) {
    throw DomainError("denoiser config: num_levels too large");
  }
}

template <typename Scalar>
DenoiserParams<Scalar>::DenoiserParams(DenoiserConfig config)
    : config_(config) {
  const Layout& layout = cached_layout(config_);
  tensors_.reserve(layout.shapes.size());
  for (const auto& shape : layout.shapes) {
    tensors_.push_back({shape.name, Mat<Scalar>::Zero(shape.rows, shape.cols)});
  }
}

template <typename Scalar>
const Parameter<Scalar>& DenoiserParams<Scalar>::at(const std::string& name) const {
  for (const auto& p : tensors_) {
    if (p.name == name) return p;
  }
  throw DomainError("no parameter named " + name);
}

template <typename Scalar>
Parameter<Scalar>& DenoiserParams<Scalar>::at(const std::string& name) {
  return const_cast<Parameter<Scalar>&>(std::as_const(*this).at(name));
}

template <typename Scalar>
std::size_t DenoiserParams<Scalar>::size() const {
  std::size_t n = 0;
  for (const auto& p : tensors_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename Scalar>
void DenoiserParams<Scalar>::set_zero() {
  for (auto& p : tensors_) p.value.setZero();
}

template <typename Scalar>
DenoiserParams<Scalar> DenoiserParams<Scalar>::zeros_like() const {
  return DenoiserParams<Scalar>(config_);
}

std::size_t parameter_count(const DenoiserConfig& config) {
  std::size_t n = 0;
  for (const auto& shape : make_layout(config).shapes) {
    n += static_cast<std::size_t>(shape.rows) * static_cast<std::size_t>(shape.cols);
  }
  return n;
}

template <typename Scalar>
DenoiserParams<Scalar> init_params(const DenoiserConfig& config, std::uint64_t seed) {
  DenoiserParams<Scalar> params(config);
  const Layout& layout = cached_layout(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < layout.shapes.size(); ++i) {
    const auto& shape = layout.shapes[i];
    auto& value = params.tensors()[i].value;
    if (shape.zero_init) {
      value.setZero();
      continue;
    }
    const double stddev = 1.0 / std::sqrt(static_cast<double>(shape.fan_in));
    // Column-major fill; fixed order keeps the draw sequence stable.
    for (Eigen::Index j = 0; j < value.cols(); ++j) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        value(r, j) = static_cast<Scalar>(stddev * normal(rng));
      }
    }
  }
  return params;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw DomainError("time_embedding: dim must be even and >= 2");
  }
  const int half = dim / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    const double arg = static_cast<double>(t) * freq;
    e(2 * i) = static_cast<Scalar>(std::sin(arg));
    e(2 * i + 1) = static_cast<Scalar>(std::cos(arg));
  }
  return e;
}

template <typename Scalar>
Latent<Scalar> forward(const DenoiserParams<Scalar>& params, const Latent<Scalar>& z_in,
                       int t, const GuidanceRow<Scalar>* guidance,
                       ForwardTrace<Scalar>* trace) {
  const DenoiserConfig& config = params.config();
  const Layout& layout = cached_layout(config);
  if (z_in.rows() != config.latent_channels || z_in.cols() < 1) {
    throw ShapeError("denoiser forward: expected " +
                     std::to_string(config.latent_channels) + " latent channels, got " +
                     std::to_string(z_in.rows()));
  }
  require_finite(z_in, "denoiser forward input");
  if (guidance != nullptr) {
    if (!config.guidance_enabled) {
      throw DomainError("denoiser forward: guidance given to an unconditioned model");
    }
    if (guidance->cols() != z_in.cols()) {
      throw ShapeError("denoiser forward: guidance length differs from latent frames");
    }
    require_finite(*guidance, "denoiser forward guidance");
  }

  const int frames = static_cast<int>(z_in.cols());
  const int multiple = config.frame_multiple();
  const int padded = (frames + multiple - 1) / multiple * multiple;
  if (trace) {
    *trace = ForwardTrace<Scalar>{};
    trace->frames = frames;
    trace->padded_frames = padded;
    trace->t = t;
  }
  ForwardWalk<Scalar> walk(params, trace);

  const Mat<Scalar> sinus = time_embedding<Scalar>(t, config.time_embed_dim);
  const Mat<Scalar> temb = walk.conv(layout.temb2, walk.act(walk.conv(layout.temb1, sinus)));
  const Mat<Scalar> film_in = walk.act(temb);

  Mat<Scalar> x = Mat<Scalar>::Zero(config.in_channels(), padded);
  x.topLeftCorner(config.latent_channels, frames) = z_in;
  if (guidance != nullptr) x.block(config.latent_channels, 0, 1, frames) = *guidance;

  const int n = config.num_levels;
  std::vector<Mat<Scalar>> skips(static_cast<size_t>(n));
  Mat<Scalar> h = walk.conv(layout.in, x);
  for (int l = 0; l < n; ++l) {
    for (const auto& block : layout.enc[l]) h = walk.block(block, h);
    if (l + 1 < n) {
      skips[l] = h;
      h = walk.conv(layout.down[l], h);
    }
  }
  for (int l = n - 1; l >= 0; --l) {
    if (l + 1 < n) {
      Mat<Scalar> cat(2 * config.width(l), h.cols() * 2);
      cat.topRows(config.width(l)) = walk.conv(layout.up[l], upsample2<Scalar>(h));
      cat.bottomRows(config.width(l)) = skips[l];
      h = walk.conv(layout.merge[l], cat);
    }
    const Mat<Scalar> scale = walk.conv(layout.film[l].scale, film_in);
    const Mat<Scalar> shift = walk.conv(layout.film[l].shift, film_in);
    walk.keep(h);
    walk.keep(scale);
    h = (h.array().colwise() * (scale.col(0).array() + Scalar(1))).matrix();
    h.colwise() += shift.col(0);
    for (const auto& block : layout.dec[l]) h = walk.block(block, h);
  }
  const Mat<Scalar> y = walk.conv(layout.out, walk.act(h));
  if (trace) trace->film_in = film_in;
  return y.leftCols(frames);
}

template <typename Scalar>
Latent<Scalar> backward(const DenoiserParams<Scalar>& params, const ForwardTrace<Scalar>& trace,
                        const Latent<Scalar>& upstream, DenoiserParams<Scalar>& grads) {
  const DenoiserConfig& config = params.config();
  const Layout& layout = cached_layout(config);
  if (!(grads.config() == config) || grads.tensors().size() != params.tensors().size()) {
    throw ShapeError("denoiser backward: gradient buffer layout differs from params");
  }
  if (upstream.rows() != config.latent_channels || upstream.cols() != trace.frames) {
    throw ShapeError("denoiser backward: upstream gradient shape mismatch");
  }
  ReverseWalk<Scalar> rev(params, trace, grads);
  const int n = config.num_levels;

  Mat<Scalar> dy = Mat<Scalar>::Zero(config.latent_channels, trace.padded_frames);
  dy.leftCols(trace.frames) = upstream;
  Mat<Scalar> dh = rev.act(rev.conv(layout.out, dy));

  Mat<Scalar> dfilm_in = Mat<Scalar>::Zero(config.time_hidden, 1);
  std::vector<Mat<Scalar>> dskips(static_cast<size_t>(n));
  for (int l = 0; l < n; ++l) {
    for (auto it = layout.dec[l].rbegin(); it != layout.dec[l].rend(); ++it) {
      dh = rev.block(*it, dh);
    }
    const Mat<Scalar>& scale = rev.take();
    const Mat<Scalar>& h_pre = rev.take();
    const Mat<Scalar> dshift = dh.rowwise().sum();
    const Mat<Scalar> dscale = dh.cwiseProduct(h_pre).rowwise().sum();
    dh = (dh.array().colwise() * (scale.col(0).array() + Scalar(1))).matrix();
    dfilm_in += rev.conv(layout.film[l].shift, dshift);
    dfilm_in += rev.conv(layout.film[l].scale, dscale);
    if (l + 1 < n) {
      const Mat<Scalar> dcat = rev.conv(layout.merge[l], dh);
      dskips[l] = dcat.bottomRows(config.width(l));
      dh = upsample2_grad<Scalar>(rev.conv(layout.up[l], dcat.topRows(config.width(l))));
    }
  }
  for (int l = n - 1; l >= 0; --l) {
    if (l + 1 < n) {
      dh = rev.conv(layout.down[l], dh);
      dh += dskips[l];
    }
    for (auto it = layout.enc[l].rbegin(); it != layout.enc[l].rend(); ++it) {
      dh = rev.block(*it, dh);
    }
  }
  Mat<Scalar> dx = rev.conv(layout.in, dh);

  const Mat<Scalar> dtemb = rev.act(dfilm_in);
  rev.conv(layout.temb1, rev.act(rev.conv(layout.temb2, dtemb)));
  if (!rev.exhausted()) {
    throw ShapeError("denoiser backward: trace does not match network layout");
  }
  return dx.leftCols(trace.frames);
}

namespace {

constexpr char kCheckpointMagic[5] = "VBCK";
constexpr std::uint8_t kCheckpointVersion = 1;

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const DenoiserParams<float>& params) {
  const DenoiserConfig& c = params.config();
  binio::Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.latent_channels));
  w.u8(c.guidance_enabled ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.base_width));
  w.u32(static_cast<std::uint32_t>(c.num_levels));
  w.u32(static_cast<std::uint32_t>(c.time_embed_dim));
  w.u32(static_cast<std::uint32_t>(c.time_hidden));
  w.u32(static_cast<std::uint32_t>(c.blocks_per_level));
  w.u32(static_cast<std::uint32_t>(c.kernel_size));
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& p : params.tensors()) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) w.f32(p.value(r, j));
    }
  }
  w.save(path);
}

DenoiserParams<float> read_checkpoint(const std::filesystem::path& path) {
  auto r = binio::Reader::load(path);
  r.expect_magic(kCheckpointMagic);
  if (r.u8() != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version");
  }
  DenoiserConfig c;
  c.latent_channels = static_cast<int>(r.u32());
  c.guidance_enabled = r.u8() != 0;
  c.base_width = static_cast<int>(r.u32());
  c.num_levels = static_cast<int>(r.u32());
  c.time_embed_dim = static_cast<int>(r.u32());
  c.time_hidden = static_cast<int>(r.u32());
  c.blocks_per_level = static_cast<int>(r.u32());
  c.kernel_size = static_cast<int>(r.u32());
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  DenoiserParams<float> params(c);
  const std::uint32_t count = r.u32();
  if (count != params.tensors().size()) {
    throw FormatError(path.string() + ": tensor count does not match config");
  }
  for (auto& p : params.tensors()) {
    std::string name(r.u16(), '\0');
    r.bytes(name.data(), name.size());
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw FormatError(path.string() + ": unexpected tensor " + name);
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) p.value(i, j) = r.f32();
    }
    if (!p.value.allFinite()) {
      throw FormatError(path.string() + ": non-finite values in " + name);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(path.string() + ": trailing bytes after last tensor");
  }
  return params;
}

template class DenoiserParams<float>;
template class DenoiserParams<double>;
template DenoiserParams<float> init_params<float>(const DenoiserConfig&, std::uint64_t);
template DenoiserParams<double> init_params<double>(const DenoiserConfig&, std::uint64_t);
template Eigen::Matrix<float, Eigen::Dynamic, 1> time_embedding<float>(int, int);
template Eigen::Matrix<double, Eigen::Dynamic, 1> time_embedding<double>(int, int);
template Latent<float> forward<float>(const DenoiserParams<float>&, const Latent<float>&, int,
                                      const GuidanceRow<float>*, ForwardTrace<float>*);
template Latent<double> forward<double>(const DenoiserParams<double>&, const Latent<double>&,
                                        int, const GuidanceRow<double>*, ForwardTrace<double>*);
template Latent<float> backward<float>(const DenoiserParams<float>&, const ForwardTrace<float>&,
                                       const Latent<float>&, DenoiserParams<float>&);
template Latent<double> backward<double>(const DenoiserParams<double>&,
                                         const ForwardTrace<double>&, const Latent<double>&,
                                         DenoiserParams<double>&);

}  // namespace vbridge
