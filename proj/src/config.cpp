#include "mcslab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mcslab {

using nlohmann::json;

namespace {

template <typename T>
void opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

void SimConfig::validate() const {
  channel.validate();
  detector.validate();
  mcs_table.validate();
  if (tb.r_symbols < 1) throw ConfigError("config: tb.r_symbols must be >= 1");
  if (snr_list_db.empty()) throw ConfigError("config: snr_list_db empty");
  if (n_slots < 1 || mcs_update_period < 1 ||
      n_slots % mcs_update_period != 0)
    throw ConfigError("config: mcs_update_period must divide n_slots");
  if (!(ref_bler > 0.0) || ref_bler > 1.0)
    throw ConfigError("config: ref_bler must be in (0,1]");
  if (n_eval_channels < 1)
    throw ConfigError("config: n_eval_channels must be >= 1");
  if (vdb.d_sub < 1 || channel.n_subcarriers % vdb.d_sub != 0)
    throw ConfigError("config: vdb.d_sub must divide the feature dimension");
  if (vdb.top_k < 1 || vdb.p_ivf < 1 || vdb.n_channels < 1)
    throw ConfigError("config: vdb parameters must be >= 1");
  if (psi.n_symbols < 10000)
    throw ConfigError("config: psi.n_symbols must be >= 1e4");
  if (!(psi.step_db > 0.0) || !(psi.snr_max_db > psi.snr_min_db))
    throw ConfigError("config: bad psi grid");
  if (curves.n_blocks < 200)
    throw ConfigError("config: curves.n_blocks must be >= 200");
  // every (n, rate) pair must give an integral information length
  for (const auto& e : mcs_table.entries) {
    const int s = e.q == 4 ? 2 : (e.q == 16 ? 4 : 6);
    const int n = tb.r_symbols * channel.n_subcarriers * s;
    const double kf = n * e.rate;
    if (std::abs(kf - std::lround(kf)) > 1e-9)
      throw ConfigError("config: mcs index " + std::to_string(e.index) +
                        " gives non-integral info length");
  }
}

std::filesystem::path SimConfig::resolved_artifact_dir() const {
  std::filesystem::path p(artifact_dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MCSLAB_CACHE_DIR"))
    return std::filesystem::path(root) / p;
  return p;
}

SimConfig SimConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  SimConfig c;
  if (j.contains("channel")) {
    const auto& jc = j.at("channel");
    opt(jc, "n_rx", c.channel.n_rx);
    opt(jc, "n_ue", c.channel.n_ue);
    opt(jc, "n_subcarriers", c.channel.n_subcarriers);
    opt(jc, "n_taps", c.channel.n_taps);
    opt(jc, "fft_size", c.channel.fft_size);
    opt(jc, "pdp_decay", c.channel.pdp_decay);
    opt(jc, "seed", c.channel.seed);
  }
  if (j.contains("detector")) {
    const auto& jd = j.at("detector");
    opt(jd, "t_iters", c.detector.t_iters);
    opt(jd, "damping", c.detector.damping);
    opt(jd, "variance_floor", c.detector.variance_floor);
  }
  if (j.contains("tb")) opt(j.at("tb"), "r_symbols", c.tb.r_symbols);
  if (j.contains("mcs_table")) {
    const auto& jt = j.at("mcs_table");
    std::string table_text;
    if (jt.is_string()) {
      std::ifstream in(jt.get<std::string>());
      if (!in)
        throw ConfigError("config: cannot open mcs_table file " +
                          jt.get<std::string>());
      std::stringstream ss;
      ss << in.rdbuf();
      table_text = ss.str();
    } else {
      table_text = jt.dump();
    }
    c.mcs_table = McsTable::from_json_array(table_text);
  }
  opt(j, "snr_list_db", c.snr_list_db);
  opt(j, "n_slots", c.n_slots);
  opt(j, "mcs_update_period", c.mcs_update_period);
  opt(j, "ref_bler", c.ref_bler);
  opt(j, "n_eval_channels", c.n_eval_channels);
  if (j.contains("vdb")) {
    const auto& jv = j.at("vdb");
    opt(jv, "k_ivf", c.vdb.k_ivf);
    opt(jv, "d_sub", c.vdb.d_sub);
    opt(jv, "p_ivf", c.vdb.p_ivf);
    opt(jv, "top_k", c.vdb.top_k);
    opt(jv, "n_channels", c.vdb.n_channels);
  }
  if (j.contains("psi")) {
    const auto& jp = j.at("psi");
    opt(jp, "snr_min_db", c.psi.snr_min_db);
    opt(jp, "snr_max_db", c.psi.snr_max_db);
    opt(jp, "step_db", c.psi.step_db);
    opt(jp, "n_symbols", c.psi.n_symbols);
  }
  if (j.contains("curves")) {
    const auto& jc = j.at("curves");
    opt(jc, "n_blocks", c.curves.n_blocks);
    opt(jc, "step_db", c.curves.step_db);
  }
  if (j.contains("seeds")) {
    const auto& js = j.at("seeds");
    opt(js, "psi", c.seeds.psi);
    opt(js, "ldpc", c.seeds.ldpc);
    opt(js, "curves", c.seeds.curves);
    opt(js, "vdb", c.seeds.vdb);
    opt(js, "eval", c.seeds.eval);
  }
  opt(j, "artifact_dir", c.artifact_dir);
  c.validate();
  return c;
}

SimConfig SimConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string SimConfig::to_json_text() const {
  json j;
  j["channel"] = {{"n_rx", channel.n_rx},
                  {"n_ue", channel.n_ue},
                  {"n_subcarriers", channel.n_subcarriers},
                  {"n_taps", channel.n_taps},
                  {"fft_size", channel.fft_size},
                  {"pdp_decay", channel.pdp_decay},
                  {"seed", channel.seed}};
  j["detector"] = {{"t_iters", detector.t_iters},
                   {"damping", detector.damping},
                   {"variance_floor", detector.variance_floor}};
  j["tb"] = {{"r_symbols", tb.r_symbols}};
  json table = json::array();
  for (const auto& e : mcs_table.entries)
    table.push_back({{"index", e.index}, {"q", e.q}, {"rate", e.rate}});
  j["mcs_table"] = table;
  j["snr_list_db"] = snr_list_db;
  j["n_slots"] = n_slots;
  j["mcs_update_period"] = mcs_update_period;
  j["ref_bler"] = ref_bler;
  j["n_eval_channels"] = n_eval_channels;
  j["vdb"] = {{"k_ivf", vdb.k_ivf},
              {"d_sub", vdb.d_sub},
              {"p_ivf", vdb.p_ivf},
              {"top_k", vdb.top_k},
              {"n_channels", vdb.n_channels}};
  j["psi"] = {{"snr_min_db", psi.snr_min_db},
              {"snr_max_db", psi.snr_max_db},
              {"step_db", psi.step_db},
              {"n_symbols", psi.n_symbols}};
  j["curves"] = {{"n_blocks", curves.n_blocks}, {"step_db", curves.step_db}};
  j["seeds"] = {{"psi", seeds.psi},
                {"ldpc", seeds.ldpc},
                {"curves", seeds.curves},
                {"vdb", seeds.vdb},
                {"eval", seeds.eval}};
  j["artifact_dir"] = artifact_dir;
  return j.dump(2);
}

}  // namespace mcslab
