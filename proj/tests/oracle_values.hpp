#pragma once

// Generated by tests/oracles/oracles.py.

namespace oracle {

inline constexpr double kAlphaBar50of100 = 0.49384359044063775;
inline constexpr double kCin = 0.2886751345948129;
inline constexpr double kCtgt = 0.5773502691896258;
inline constexpr double kTimeEmbedding7x8[8] = {
    0.6569865987187891, 0.7539022543433046, 0.6442176872376911, 0.7648421872844884,
    0.06994284733753277, 0.9975510002532796, 0.006999942833473391, 0.9999755001000415};
inline constexpr float kGuidanceRaster8[8] = {0.0f, 0.0f, 0.5f, 0.5f, 1.0f, 1.0f, 0.0f, 0.25f};
inline constexpr float kGuidancePrior8[8] = {-3.0f, -2.0f, -1.0f, 0.0f, 1.0f, 2.0f, 1.0f, 0.0f};
inline constexpr double kGuidance8[8] = {
    -0.9925187393865019, -0.973324469849294, -0.2378264497288941, 0.3782737727268007,
    0.9803874392191834,  0.9945137072750143, -0.22633795194963274, -0.23209029496456196};
inline constexpr double kForwardDiffuse = 4.464101615137754;
inline constexpr double kBridgedZ = 1.4433756729740645;
inline constexpr double kBridgedEps = 1.1547005383792517;
inline constexpr double kInitTerminal = 2.121320343559643;
inline constexpr double kDdimZ0 = 3.242640687119285;
inline constexpr double kDdimPrev = 3.3082092103903284;
inline constexpr double kDct4Latent[4] = {5.0, -2.2304424973876635, 0.0, -0.1585126677811084};

}  // namespace oracle
