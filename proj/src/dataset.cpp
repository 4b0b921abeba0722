#include "evclip/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"
#include "evclip/image.hpp"
#include "evclip/text_format.hpp"

namespace evclip {

namespace fs = std::filesystem;

std::vector<int> VideoDataset::labels() const {
  std::vector<int> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(v.label);
  return out;
}

fs::path frame_path(const fs::path& video_dir, int frame) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04d.ppm", frame);
  return video_dir / name;
}

void write_dataset(const fs::path& dir, const std::vector<std::string>& class_names,
                   const std::vector<VideoClip>& videos, const std::vector<std::string>& notes) {
  if (videos.empty()) throw DomainError("write_dataset: no videos");
  std::ostringstream manifest;
  for (const auto& n : notes) manifest << "# " << n << "\n";
  manifest << "classes = ";
  for (std::size_t c = 0; c < class_names.size(); ++c) manifest << (c ? "," : "") << class_names[c];
  manifest << "\nchannels = " << videos.front().channels << "\nheight = " << videos.front().height
           << "\nwidth = " << videos.front().width << "\n";
  for (const auto& v : videos) {
    if (v.id.find_first_of(" \t/\\") != std::string::npos) throw DomainError("video id '" + v.id + "' contains separators");
    const fs::path rel = fs::path("videos") / v.id;
    for (int f = 0; f < v.num_frames(); ++f) {
      write_ppm(frame_path(dir / rel, f), frame_to_image(v.frames.col(f), v.channels, v.height, v.width));
    }
    manifest << "video = " << v.id << " " << v.label << " " << rel.generic_string() << " " << v.num_frames() << "\n";
  }
  const std::string text = manifest.str();
  bin::write_file(dir / kManifestName, std::vector<unsigned char>(text.begin(), text.end()));
}

VideoDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) throw IoError("dataset manifest '" + manifest_path.string() + "' does not exist");
  const auto bytes = bin::read_file(manifest_path);
  const std::string text(bytes.begin(), bytes.end());
  VideoDataset ds;
  int channels = 0, height = 0, width = 0;
  struct Entry {
    std::string id, rel;
    int label = 0, frames = 0;
    int line = 0;
  };
  std::vector<Entry> entries;
  try {
    for (const auto& kv : parse_key_value_lines(text, false)) {
      const std::string where = manifest_path.string() + " line " + std::to_string(kv.number) + ": ";
      if (kv.key == "classes") {
        std::stringstream ss(kv.value);
        std::string name;
        while (std::getline(ss, name, ',')) ds.class_names.push_back(trim(name));
      } else if (kv.key == "channels") {
        channels = static_cast<int>(parse_int(kv.value, where));
      } else if (kv.key == "height") {
        height = static_cast<int>(parse_int(kv.value, where));
      } else if (kv.key == "width") {
        width = static_cast<int>(parse_int(kv.value, where));
      } else if (kv.key == "video") {
        std::istringstream ss(kv.value);
        Entry e;
        e.line = kv.number;
        if (!(ss >> e.id >> e.label >> e.rel >> e.frames)) throw FormatError(where + "expected '<id> <label> <dir> <frames>'");
        entries.push_back(e);
      } else {
        throw FormatError(where + "unknown key '" + kv.key + "'");
      }
    }
  } catch (const FormatError& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (ds.class_names.empty()) throw FormatError(manifest_path.string() + ": no classes listed");
  if (channels < 1 || height < 1 || width < 1) throw FormatError(manifest_path.string() + ": missing frame geometry");
  for (const auto& e : entries) {
    if (e.label < 0 || e.label >= static_cast<int>(ds.class_names.size())) {
      throw FormatError(manifest_path.string() + " line " + std::to_string(e.line) + ": label out of range");
    }
    if (e.frames < 1) throw FormatError(manifest_path.string() + " line " + std::to_string(e.line) + ": no frames");
    VideoClip v;
    v.channels = channels;
    v.height = height;
    v.width = width;
    v.label = e.label;
    v.id = e.id;
    v.frames.resize(v.pixels_per_frame(), e.frames);
    for (int f = 0; f < e.frames; ++f) {
      const Image img = read_ppm(frame_path(dir / e.rel, f));
      if (img.width != width || img.height != height) {
        throw FormatError(frame_path(dir / e.rel, f).string() + ": size differs from the manifest geometry");
      }
      v.frames.col(f) = image_to_frame(img, channels);
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

VideoClip load_video_dir(const fs::path& dir, int channels) {
  if (!fs::is_directory(dir)) throw IoError("video directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("frame_", 0) == 0 && entry.path().extension() == ".ppm") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw IoError("no frame_*.ppm files in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  VideoClip v;
  v.channels = channels;
  v.id = dir.filename().string();
  for (std::size_t f = 0; f < files.size(); ++f) {
    const Image img = read_ppm(files[f]);
    if (f == 0) {
      v.height = img.height;
      v.width = img.width;
      v.frames.resize(v.pixels_per_frame(), static_cast<Eigen::Index>(files.size()));
    } else if (img.height != v.height || img.width != v.width) {
      throw FormatError(files[f].string() + ": frame size differs from the first frame");
    }
    v.frames.col(static_cast<Eigen::Index>(f)) = image_to_frame(img, channels);
  }
  return v;
}

}  // namespace evclip
