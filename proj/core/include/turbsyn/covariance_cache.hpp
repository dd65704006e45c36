#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "turbsyn/covariance.hpp"

namespace turbsyn {

// Content key for one precomputed covariance field: canonical text over
// the kernel version, geometry, profile and tolerances, plus its FNV-1a
// hash (used in the filename and verified on load).
struct CovarianceCacheKey {
  std::string text;
  uint64_t hash = 0;
};

CovarianceCacheKey covariance_cache_key(const ImagingGeometry& geom,
                                        const CnProfile& profile,
                                        const CovarianceBuildOptions& opts);

std::filesystem::path covariance_cache_path(const std::filesystem::path& dir,
                                            const CovarianceCacheKey& key);

// Returns nullopt when the file is missing; throws IoError on a corrupt or
// mismatched file.
std::optional<CovarianceField> load_covariance_field(
    const std::filesystem::path& file, const CovarianceCacheKey& key);

// Write-to-temp then atomic rename; safe against concurrent readers.
void store_covariance_field(const std::filesystem::path& file,
                            const CovarianceField& field,
                            const CovarianceCacheKey& key);

// Cache wrapper around build_covariance_field; empty dir disables caching.
CovarianceField get_or_build_covariance_field(
    const std::filesystem::path& cache_dir, const ImagingGeometry& geom,
    const CnProfile& profile, const CovarianceBuildOptions& opts = {});

}  // namespace turbsyn
