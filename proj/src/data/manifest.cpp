#include "data/manifest.hpp"

#include <fstream>
#include <sstream>

#include "common/errors.hpp"
#include "data/netpbm.hpp"

namespace lesion {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  Manifest manifest;
  manifest.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty()) continue;
    if (!header_seen && line.rfind("#classes=", 0) == 0) {
      manifest.class_names = split_csv(line.substr(9));
      continue;
    }
    if (!header_seen) {
      if (line != "image,label,mask" && line != "image,label")
        throw ParseError("manifest line " + std::to_string(line_no) + ": expected header 'image,label,mask'");
      header_seen = true;
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError("manifest line " + std::to_string(line_no) + ": expected 2 or 3 fields");
    ManifestRow row;
    row.image_path = strip(fields[0]);
    if (row.image_path.empty()) throw ParseError("manifest line " + std::to_string(line_no) + ": empty image path");
    try {
      std::size_t used = 0;
      const long long label = std::stoll(strip(fields[1]), &used);
      if (label < 0 || used != strip(fields[1]).size()) throw std::invalid_argument("label");
      row.label = static_cast<std::size_t>(label);
    } catch (const std::exception&) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": bad label '" + fields[1] + "'");
    }
    if (fields.size() == 3 && !strip(fields[2]).empty()) row.mask_path = strip(fields[2]);
    if (!manifest.class_names.empty() && row.label >= manifest.class_names.size())
      throw ParseError("manifest line " + std::to_string(line_no) + ": label " + std::to_string(row.label) +
                       " out of range for " + std::to_string(manifest.class_names.size()) + " classes");
    manifest.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ParseError("manifest: missing header 'image,label,mask'");
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path());
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream out;
  if (!manifest.class_names.empty()) {
    out << "#classes=";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) out << (i ? "," : "") << manifest.class_names[i];
    out << '\n';
  }
  out << "image,label,mask\n";
  for (const auto& row : manifest.rows) out << row.image_path << ',' << row.label << ',' << row.mask_path.value_or("") << '\n';
  return out.str();
}

std::vector<Sample> load_dataset(const Manifest& manifest, const LoadOptions& options) {
  std::vector<Sample> samples;
  samples.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    if (options.num_classes && row.label >= options.num_classes)
      throw ParseError("manifest label " + std::to_string(row.label) + " out of range for " +
                       std::to_string(options.num_classes) + " classes (" + row.image_path + ")");
    Sample sample;
    sample.id = row.image_path;
    sample.label = row.label;
    sample.image = read_netpbm(manifest.base_dir / row.image_path);
    const std::size_t h = options.height ? options.height : sample.image.height;
    const std::size_t w = options.width ? options.width : sample.image.width;
    if (options.channels && sample.image.channels != options.channels)
      throw DimensionError(row.image_path + ": image is " + sample.image.dims() + " but the model expects " +
                           std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(options.channels) +
                           " (spatial dims are resized, channels are not)");
    if (row.mask_path) {
      Image mask = read_netpbm(manifest.base_dir / *row.mask_path);
      if (mask.channels != 1) throw DimensionError(*row.mask_path + ": mask must be a gray (P5) image");
      if (mask.height != sample.image.height || mask.width != sample.image.width)
        throw DimensionError(*row.mask_path + ": mask " + mask.dims() + " does not match image " + sample.image.dims());
      for (auto& v : mask.pixels) v = v >= Scalar(0.5) ? Scalar(1) : Scalar(0);
      sample.mask = resize_nearest(mask, h, w);
    }
    sample.image = resize_nearest(sample.image, h, w);
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace lesion
