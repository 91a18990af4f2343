#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "vbridge/latent.hpp"

namespace vbridge {

struct Waveform {
  int sample_rate = 16000;
  Eigen::VectorXf samples;
};

// Frame-wise orthonormal transform codec. Each frame of W samples is
// projected onto the first C rows of a fixed W x W orthonormal basis.
struct CodecSpec {
  int frame_size = 64;
  int kept_coefficients = 32;
  int sample_rate = 16000;
  Eigen::MatrixXd basis;  // rows are basis vectors
};

// Type-II DCT basis, orthonormal scaling.
CodecSpec make_dct_codec(int frame_size, int kept_coefficients, int sample_rate = 16000);

// Pluggable waveform <-> latent mapping.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual LatentTensor encode(const Waveform& waveform) const = 0;
  virtual Waveform decode(const LatentTensor& latent) const = 0;
  virtual int channels() const = 0;
  virtual int frame_size() const = 0;
  virtual int sample_rate() const = 0;
};

class OrthonormalCodec final : public Codec {
 public:
  explicit OrthonormalCodec(CodecSpec spec);
  LatentTensor encode(const Waveform& waveform) const override;
  Waveform decode(const LatentTensor& latent) const override;
  int channels() const override { return spec_.kept_coefficients; }
  int frame_size() const override { return spec_.frame_size; }
  int sample_rate() const override { return spec_.sample_rate; }
  const CodecSpec& spec() const { return spec_; }

 private:
  CodecSpec spec_;
  Eigen::MatrixXd analysis_;  // C x W, double to keep round trips exact to float rounding
};

LatentTensor encode(const CodecSpec& spec, const Waveform& waveform);
Waveform decode(const CodecSpec& spec, const LatentTensor& latent);

int frame_count(int num_samples, int frame_size);

// "VBLT", version byte, u32 C, u32 L, C*L little-endian float32, row-major.
void write_latent_file(const std::filesystem::path& path, const LatentTensor& latent);
LatentTensor read_latent_file(const std::filesystem::path& path);

// Mono RIFF/WAVE. Reads 16-bit PCM or 32-bit float; writes 16-bit PCM
// unless as_float is set.
void write_wav(const std::filesystem::path& path, const Waveform& waveform,
               bool as_float = false);
Waveform read_wav(const std::filesystem::path& path);

}  // namespace vbridge
