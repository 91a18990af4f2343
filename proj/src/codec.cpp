#include "vbridge/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "binio.hpp"

namespace vbridge {

CodecSpec make_dct_codec(int frame_size, int kept_coefficients, int sample_rate) {
  if (frame_size < 1 || kept_coefficients < 1 || kept_coefficients > frame_size) {
    throw DomainError("codec: need 1 <= kept_coefficients <= frame_size");
  }
  if (sample_rate <= 0) throw DomainError("codec: sample_rate must be positive");
  CodecSpec spec;
  spec.frame_size = frame_size;
  spec.kept_coefficients = kept_coefficients;
  spec.sample_rate = sample_rate;
  spec.basis.resize(frame_size, frame_size);
  const double n = frame_size;
  for (int k = 0; k < frame_size; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < frame_size; ++i) {
      spec.basis(k, i) = scale * std::cos(std::numbers::pi * (i + 0.5) * k / n);
    }
  }
  return spec;
}

int frame_count(int num_samples, int frame_size) {
  return std::max(1, (num_samples + frame_size - 1) / frame_size);
}

OrthonormalCodec::OrthonormalCodec(CodecSpec spec) : spec_(std::move(spec)) {
  if (spec_.basis.rows() != spec_.frame_size || spec_.basis.cols() != spec_.frame_size) {
    throw ShapeError("codec: basis must be frame_size x frame_size");
  }
  if (spec_.kept_coefficients < 1 || spec_.kept_coefficients > spec_.frame_size) {
    throw DomainError("codec: need 1 <= kept_coefficients <= frame_size");
  }
  const Eigen::MatrixXd gram = spec_.basis * spec_.basis.transpose();
  if (!gram.isIdentity(1e-9)) throw DomainError("codec: basis is not orthonormal");
  analysis_ = spec_.basis.topRows(spec_.kept_coefficients);
}

LatentTensor OrthonormalCodec::encode(const Waveform& waveform) const {
  if (waveform.sample_rate != spec_.sample_rate) {
    throw DomainError("codec: waveform sample rate " + std::to_string(waveform.sample_rate) +
                      " differs from codec rate " + std::to_string(spec_.sample_rate));
  }
  require_finite(waveform.samples, "codec encode");
  const int w = spec_.frame_size;
  const int frames = frame_count(static_cast<int>(waveform.samples.size()), w);
  Eigen::MatrixXd framed = Eigen::MatrixXd::Zero(w, frames);
  std::copy(waveform.samples.data(), waveform.samples.data() + waveform.samples.size(),
            framed.data());
  return (analysis_ * framed).cast<float>();
}

Waveform OrthonormalCodec::decode(const LatentTensor& latent) const {
  if (latent.rows() != spec_.kept_coefficients) {
    throw ShapeError("codec decode: expected " + std::to_string(spec_.kept_coefficients) +
                     " channels, got " + std::to_string(latent.rows()));
  }
  require_finite(latent, "codec decode");
  const Eigen::MatrixXf framed = (analysis_.transpose() * latent.cast<double>()).cast<float>();
  Waveform out;
  out.sample_rate = spec_.sample_rate;
  out.samples = Eigen::Map<const Eigen::VectorXf>(framed.data(), framed.size());
  return out;
}

LatentTensor encode(const CodecSpec& spec, const Waveform& waveform) {
  return OrthonormalCodec(spec).encode(waveform);
}

Waveform decode(const CodecSpec& spec, const LatentTensor& latent) {
  return OrthonormalCodec(spec).decode(latent);
}

namespace {
constexpr char kLatentMagic[5] = "VBLT";
constexpr std::uint8_t kLatentVersion = 1;
}  // namespace

void write_latent_file(const std::filesystem::path& path, const LatentTensor& latent) {
  require_finite(latent, "write_latent_file");
  binio::Writer w;
  w.bytes(kLatentMagic, 4);
  w.u8(kLatentVersion);
  w.u32(static_cast<std::uint32_t>(latent.rows()));
  w.u32(static_cast<std::uint32_t>(latent.cols()));
  for (Eigen::Index c = 0; c < latent.rows(); ++c) {
    for (Eigen::Index l = 0; l < latent.cols(); ++l) w.f32(latent(c, l));
  }
  w.save(path);
}

LatentTensor read_latent_file(const std::filesystem::path& path) {
  auto r = binio::Reader::load(path);
  r.expect_magic(kLatentMagic);
  const std::uint8_t version = r.u8();
  if (version != kLatentVersion) {
    throw FormatError(path.string() + ": unsupported latent version " + std::to_string(version));
  }
  const std::uint32_t channels = r.u32();
  const std::uint32_t frames = r.u32();
  if (channels == 0 || frames == 0) throw FormatError(path.string() + ": empty latent");
  const std::uint64_t count = static_cast<std::uint64_t>(channels) * frames;
  if (r.remaining() != count * 4) {
    throw FormatError(path.string() + ": payload size " + std::to_string(r.remaining()) +
                      " does not match " + std::to_string(count * 4));
  }
  LatentTensor latent(channels, frames);
  for (std::uint32_t c = 0; c < channels; ++c) {
    for (std::uint32_t l = 0; l < frames; ++l) latent(c, l) = r.f32();
  }
  if (!latent.allFinite()) throw FormatError(path.string() + ": non-finite latent values");
  return latent;
}

void write_wav(const std::filesystem::path& path, const Waveform& waveform, bool as_float) {
  require_finite(waveform.samples, "write_wav");
  const auto n = static_cast<std::uint32_t>(waveform.samples.size());
  const std::uint16_t bits = as_float ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const std::uint32_t data_bytes = n * block;
  binio::Writer w;
  w.bytes("RIFF", 4);
  w.u32(36 + data_bytes);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(as_float ? 3 : 1);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(waveform.sample_rate));
  w.u32(static_cast<std::uint32_t>(waveform.sample_rate) * block);
  w.u16(block);
  w.u16(bits);
  w.bytes("data", 4);
  w.u32(data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float v = std::clamp(waveform.samples[i], -1.0f, 1.0f);
    if (as_float) {
      w.f32(v);
    } else {
      w.i16(static_cast<std::int16_t>(std::lround(v * 32767.0f)));
    }
  }
  w.save(path);
}

Waveform read_wav(const std::filesystem::path& path) {
  auto r = binio::Reader::load(path);
  char tag[4];
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "RIFF") throw FormatError(path.string() + ": not a RIFF file");
  r.u32();
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "WAVE") throw FormatError(path.string() + ": not a WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    r.bytes(tag, 4);
    const std::uint32_t size = r.u32();
    const std::string id(tag, 4);
    const std::size_t next = r.position() + size + (size & 1u);
    if (id == "fmt ") {
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();
      r.u16();
      bits = r.u16();
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      if (channels != 1) throw FormatError(path.string() + ": only mono WAVE is supported");
      Waveform out;
      out.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        out.samples.resize(size / 2);
        for (Eigen::Index i = 0; i < out.samples.size(); ++i) {
          out.samples[i] = static_cast<float>(r.i16()) / 32767.0f;
        }
      } else if (format == 3 && bits == 32) {
        out.samples.resize(size / 4);
        for (Eigen::Index i = 0; i < out.samples.size(); ++i) out.samples[i] = r.f32();
      } else {
        throw FormatError(path.string() + ": unsupported sample format");
      }
      require_finite(out.samples, "read_wav");
      return out;
    }
    r.seek(next);
  }
  throw FormatError(path.string() + ": no data chunk");
}

}  // namespace vbridge
