#pragma once

#include <string>

#include "ikd/dataset.hpp"
#include "ikd/koopman.hpp"

namespace ikd {

/// Binary dataset file, magic "IKDS": dims and segment count, the fitted
/// normalizer, every segment with its provenance tag, and a CRC32 trailer.
/// All integers little-endian, all floats IEEE binary64, matrices row-major.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Model checkpoint, magic "IKPM": dims (state, control, lift, hidden,
/// blocks), the normalizer, the net tensors in declaration order, then A and
/// B row-major, CRC32 trailer.
void save_model(const KoopmanModel& model, const std::string& path);
KoopmanModel load_model(const std::string& path);

/// Reference repository file, magic "IKRR": dims, generation seed and noise
/// level, the repo normalizer, the normalized reference matrices, CRC32
/// trailer.
void save_repo(const ReferenceRepository& repo, const std::string& path);
ReferenceRepository load_repo(const std::string& path);

}  // namespace ikd
