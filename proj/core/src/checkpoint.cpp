#include "vollab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "vollab/sha256.hpp"

namespace vollab {

// ============================================================================
// File helpers
// ============================================================================

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename T>
void append_raw(std::string& buf, const T* data, std::size_t count) {
  const std::size_t bytes = count * sizeof(T);
  const std::size_t at = buf.size();
  buf.resize(at + bytes);
  std::memcpy(buf.data() + at, data, bytes);
}

template <typename T>
void consume_raw(const std::string& buf, std::size_t& cursor, T* data,
                 std::size_t count) {
  const std::size_t bytes = count * sizeof(T);
  if (cursor + bytes > buf.size())
    throw SchemaError("binary payload truncated");
  std::memcpy(data, buf.data() + cursor, bytes);
  cursor += bytes;
}

Json parse_header(const std::string& text, const std::string& path,
                  const char* expect_format) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("malformed header '" + path + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("format") ||
      j.at("format") != expect_format)
    throw SchemaError("header '" + path + "' is not a " +
                      std::string(expect_format) + " artifact");
  return j;
}

void check_payload(const Json& header, const std::string& bin,
                   const std::string& path) {
  const std::string want = header.at("bin_sha256").get<std::string>();
  const std::string got = sha256_hex(bin);
  if (want != got)
    throw SchemaError("payload hash mismatch for '" + path +
                      "' (corrupted or edited)");
}

}  // namespace

// ============================================================================
// Parameters
// ============================================================================

void save_params(const Parameters& p, const std::string& prefix) {
  std::string bin;
  Json tensors = Json::array();
  for (const NamedTensor& nt : p.items) {
    Json t;
    t["name"] = nt.name;
    t["shape"] = std::vector<std::int64_t>(nt.t.shape.begin(),
                                           nt.t.shape.end());
    t["muon_matrix"] = nt.muon_matrix;
    tensors.push_back(t);
    append_raw(bin, nt.t.v.data(), nt.t.v.size());
  }

  Json h;
  h["format"] = "vollab-params-v1";
  h["version"] = kVersion;
  h["model"] = model_to_json(p.cfg);
  h["init_seed"] = p.init_seed;
  h["step_count"] = p.step_count;
  h["n_scalars"] = p.n_scalars();
  h["tensors"] = tensors;
  h["bin_sha256"] = sha256_hex(bin);

  write_file(prefix + ".json", h.dump(2) + "\n");
  write_file(prefix + ".bin", bin);
}

Parameters load_params(const std::string& prefix) {
  const std::string jpath = prefix + ".json";
  const Json h = parse_header(read_file(jpath), jpath, "vollab-params-v1");
  const std::string bin = read_file(prefix + ".bin");
  check_payload(h, bin, prefix + ".bin");

  Parameters p;
  p.cfg = model_from_json(h.at("model"), "model");
  p.init_seed = h.at("init_seed").get<std::uint64_t>();
  p.step_count = h.at("step_count").get<std::int64_t>();

  std::size_t cursor = 0;
  for (const Json& t : h.at("tensors")) {
    NamedTensor nt;
    nt.name = t.at("name").get<std::string>();
    nt.muon_matrix = t.at("muon_matrix").get<bool>();
    const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    nt.t.shape.assign(shape.begin(), shape.end());
    nt.t.v.resize(Tensor::numel_of(nt.t.shape));
    consume_raw(bin, cursor, nt.t.v.data(), nt.t.v.size());
    p.items.push_back(std::move(nt));
  }
  if (cursor != bin.size())
    throw SchemaError("parameter payload has trailing bytes");
  if (p.n_scalars() != h.at("n_scalars").get<std::size_t>())
    throw SchemaError("parameter count disagrees with header");
  return p;
}

// ============================================================================
// Dataset
// ============================================================================

void save_dataset(const WindowedDataset& ds, const std::string& prefix) {
  std::string bin;
  append_raw(bin, ds.X.v.data(), ds.X.v.size());
  append_raw(bin, ds.y.data(), ds.y.size());
  append_raw(bin, ds.split.data(), ds.split.size());
  append_raw(bin, ds.asset.data(), ds.asset.size());
  append_raw(bin, ds.target_date.data(), ds.target_date.size());

  Json h;
  h["format"] = "vollab-dataset-v1";
  h["version"] = kVersion;
  h["n_rows"] = ds.n_rows();
  h["L"] = ds.L;
  h["asset_ids"] = ds.asset_ids;
  h["skipped_assets"] = ds.skipped_assets;
  h["counts"] = {{"train", ds.count_of(Split::train)},
                 {"val", ds.count_of(Split::val)},
                 {"test", ds.count_of(Split::test)}};
  h["bounds"] = {{"train_end", ds.bounds.train_end},
                 {"val_end", ds.bounds.val_end},
                 {"n_train_dates", ds.bounds.n_train_dates},
                 {"n_val_dates", ds.bounds.n_val_dates},
                 {"n_test_dates", ds.bounds.n_test_dates}};
  h["stats"] = {{"q_lo", ds.stats.q_lo},
                {"q_hi", ds.stats.q_hi},
                {"mu", ds.stats.mu},
                {"sigma", ds.stats.sigma}};
  h["bin_sha256"] = sha256_hex(bin);

  write_file(prefix + ".json", h.dump(2) + "\n");
  write_file(prefix + ".bin", bin);
}

WindowedDataset load_dataset(const std::string& prefix) {
  const std::string jpath = prefix + ".json";
  const Json h = parse_header(read_file(jpath), jpath, "vollab-dataset-v1");
  const std::string bin = read_file(prefix + ".bin");
  check_payload(h, bin, prefix + ".bin");

  WindowedDataset ds;
  const std::size_t n = h.at("n_rows").get<std::size_t>();
  ds.L = h.at("L").get<std::size_t>();
  ds.asset_ids = h.at("asset_ids").get<std::vector<std::string>>();
  ds.skipped_assets = h.at("skipped_assets").get<std::size_t>();
  const Json& b = h.at("bounds");
  ds.bounds.train_end = b.at("train_end").get<std::int64_t>();
  ds.bounds.val_end = b.at("val_end").get<std::int64_t>();
  ds.bounds.n_train_dates = b.at("n_train_dates").get<std::size_t>();
  ds.bounds.n_val_dates = b.at("n_val_dates").get<std::size_t>();
  ds.bounds.n_test_dates = b.at("n_test_dates").get<std::size_t>();
  const Json& st = h.at("stats");
  ds.stats.q_lo = st.at("q_lo").get<std::vector<double>>();
  ds.stats.q_hi = st.at("q_hi").get<std::vector<double>>();
  ds.stats.mu = st.at("mu").get<double>();
  ds.stats.sigma = st.at("sigma").get<double>();

  ds.X.shape = {n, ds.L};
  ds.X.v.resize(n * ds.L);
  ds.y.resize(n);
  ds.split.resize(n);
  ds.asset.resize(n);
  ds.target_date.resize(n);

  std::size_t cursor = 0;
  consume_raw(bin, cursor, ds.X.v.data(), ds.X.v.size());
  consume_raw(bin, cursor, ds.y.data(), ds.y.size());
  consume_raw(bin, cursor, ds.split.data(), ds.split.size());
  consume_raw(bin, cursor, ds.asset.data(), ds.asset.size());
  consume_raw(bin, cursor, ds.target_date.data(), ds.target_date.size());
  if (cursor != bin.size())
    throw SchemaError("dataset payload has trailing bytes");
  return ds;
}

}  // namespace vollab
