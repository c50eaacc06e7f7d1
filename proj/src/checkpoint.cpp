#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "imot/errors.hpp"
#include "imot/model.hpp"

namespace imot {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write checkpoint " + path);
  nlohmann::ordered_json header;
  header["config"] = to_json(model.config());
  header["normalization"] = model.normalization().to_json();
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& store = model.store();
  put<std::uint64_t>(out, store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store.name(i);
    const auto& v = store.value(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::int64_t>(out, v.rows());
    put<std::int64_t>(out, v.cols());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw RuntimeFailure("failed writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path + ": cannot open checkpoint");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError(path + ": not an imot checkpoint");
  }
  if (take<std::uint32_t>(in, path) != kVersion) throw ValidationError(path + ": unsupported checkpoint version");
  const auto len = take<std::uint64_t>(in, path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ValidationError(path + ": truncated checkpoint");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": corrupt header: " + e.what());
  }
  Model model(config_from_json(header.at("config")), Normalization::from_json(header.at("normalization")));
  auto& store = model.store();
  const auto count = take<std::uint64_t>(in, path);
  if (count != store.size()) throw ValidationError(path + ": tensor count does not match its config");
  for (std::size_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = take<std::int64_t>(in, path);
    const auto cols = take<std::int64_t>(in, path);
    auto& v = store.value(i);
    if (!in || name != store.name(i) || rows != v.rows() || cols != v.cols()) {
      throw ValidationError(path + ": tensor \"" + name + "\" does not match the model layout");
    }
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ValidationError(path + ": truncated checkpoint");
  }
  return model;
}

}  // namespace imot
