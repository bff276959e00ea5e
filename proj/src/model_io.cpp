#include "nstate/model_io.hpp"

#include <fstream>

#include "nstate/byteio.hpp"

namespace nstate {

using nlohmann::json;

namespace {

json describe_layers(Sequential<float>& model) {
  json layers = json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto& l = model.layer(i);
    json params = json::array();
    for (auto* p : l.parameters())
      params.push_back({{"name", p->name}, {"shape", p->value.shape()}});
    layers.push_back({{"name", l.name()}, {"kind", to_string(l.kind())},
                      {"hyper", l.hyper()}, {"params", params}});
  }
  return layers;
}

}  // namespace

void save_model(const std::filesystem::path& path, Sequential<float>& model,
                const ModelSpec& spec, std::uint64_t seed) {
  json header = {{"format", "NSTMODW1"},
                 {"spec", spec.to_json()},
                 {"seed", seed},
                 {"param_count", model.count_params()},
                 {"layers", describe_layers(model)}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kModelMagic, sizeof kModelMagic);
  byteio::write_u32_le(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : model.parameters()) byteio::write_f32_le(os, p->value.values());
  if (!os) throw FormatError("write failed: " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != std::string(kModelMagic, 8))
    throw FormatError(path.string() + ": bad magic (expected NSTMODW1)");
  const auto len = byteio::read_u32_le(is, path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError(path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid header json: " + e.what());
  }
  LoadedModel out;
  out.spec = ModelSpec::from_json(header.at("spec"));
  out.seed = header.at("seed").get<std::uint64_t>();
  out.model = build_model<float>(out.spec);
  if (describe_layers(out.model) != header.at("layers"))
    throw FormatError(path.string() + ": layer description does not match architecture");
  for (auto* p : out.model.parameters())
    if (!byteio::read_f32_le(is, p->value.values()))
      throw FormatError(path.string() + ": truncated parameter data");
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(path.string() + ": trailing bytes after parameter data");
  return out;
}

}  // namespace nstate
