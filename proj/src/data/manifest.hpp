#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "data/sample.hpp"

namespace lesion {

struct ManifestRow {
  std::string image_path;
  std::size_t label = 0;
  std::optional<std::string> mask_path;
};

// CSV with header `image,label,mask` (mask may be empty or the column
// omitted). An optional first line `#classes=a,b,c` names the classes.
// Relative paths resolve against the manifest's directory.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRow> rows;
  std::vector<std::string> class_names;
};

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);

struct LoadOptions {
  std::size_t height = 0;  // 0 keeps source dims
  std::size_t width = 0;
  std::size_t channels = 0;  // 0 accepts any
  std::size_t num_classes = 0;  // 0 skips the range check
};

// Reads every image/mask; resizes nearest-neighbour to the requested dims.
// Masks are binarized at 0.5.
std::vector<Sample> load_dataset(const Manifest& manifest, const LoadOptions& options);

}  // namespace lesion
