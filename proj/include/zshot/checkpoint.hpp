#pragma once

#include <filesystem>
#include <vector>

#include "zshot/autodiff.hpp"

namespace zshot {

/// Text checkpoint. After a `zshot-checkpoint 1` header, each tensor is a
/// `name,rows,cols` line followed by `rows` lines of comma-separated values
/// in shortest round-trip form, so a save/load cycle is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params);

/// Fills every parameter in `params` by name. Missing file or tensor →
/// LoadError; shape mismatch → FormatError.
void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace zshot
