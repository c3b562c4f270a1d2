#include "mcslab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mcslab/mathutil.hpp"
#include "mcslab/parallel.hpp"

namespace mcslab {

using nlohmann::json;

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::zf_sinr: return "zf_sinr";
    case Pipeline::lmmse_mi: return "lmmse_mi";
    case Pipeline::vss_mi: return "vss_mi";
  }
  return "?";
}

std::string to_string(DetectorKind d) {
  return d == DetectorKind::lmmse ? "lmmse" : "ep";
}

Pipeline pipeline_from_string(const std::string& s) {
  if (s == "zf_sinr") return Pipeline::zf_sinr;
  if (s == "lmmse_mi") return Pipeline::lmmse_mi;
  if (s == "vss_mi") return Pipeline::vss_mi;
  throw ConfigError("unknown pipeline: " + s);
}

DetectorKind detector_from_string(const std::string& s) {
  if (s == "lmmse") return DetectorKind::lmmse;
  if (s == "ep") return DetectorKind::ep;
  throw ConfigError("unknown detector: " + s);
}

int tb_code_length(const SimConfig& config, const McsEntry& e) {
  const int s = e.q == 4 ? 2 : (e.q == 16 ? 4 : 6);
  return config.tb.r_symbols * config.channel.n_subcarriers * s;
}

namespace {

Eigen::MatrixXd lmmse_sinr_all(const ChannelRealization& h, double rho) {
  const int l_sub = h.config.n_subcarriers;
  Eigen::MatrixXd gamma(h.config.n_ue, l_sub);
  for (int l = 0; l < l_sub; ++l) gamma.col(l) = lmmse_sinr(h.h[l], rho);
  return gamma;
}

Eigen::MatrixXd features_from_gamma(const Eigen::MatrixXd& gamma,
                                    const PsiTable& psi) {
  Eigen::MatrixXd f(gamma.rows(), gamma.cols());
  for (Eigen::Index l = 0; l < gamma.cols(); ++l)
    for (Eigen::Index m = 0; m < gamma.rows(); ++m)
      f(m, l) = psi_eval(psi, linear_to_db(std::max(gamma(m, l), 1e-30)));
  return f;
}

std::vector<int> table_orders(const McsTable& table) {
  std::vector<int> qs;
  for (const auto& e : table.entries)
    if (std::find(qs.begin(), qs.end(), e.q) == qs.end()) qs.push_back(e.q);
  return qs;
}

std::filesystem::path psi_path(const std::filesystem::path& dir, int q) {
  return dir / ("psi_q" + std::to_string(q) + ".json");
}

std::filesystem::path code_path(const std::filesystem::path& dir, int n, int k,
                                std::uint64_t seed) {
  return dir / ("code_n" + std::to_string(n) + "_k" + std::to_string(k) +
                "_s" + std::to_string(seed) + ".txt");
}

std::filesystem::path vdb_path(const std::filesystem::path& dir, int q) {
  return dir / ("vdb_q" + std::to_string(q) + ".bin");
}

void save_psi(const PsiTable& t, const std::filesystem::path& path) {
  json j;
  j["q"] = t.q;
  j["snr_grid_db"] = t.snr_grid_db;
  j["mi"] = t.mi;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw StateError("save_psi: write failed: " + path.string());
}

PsiTable load_psi(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("load_psi: cannot open " + path.string());
  json j;
  in >> j;
  PsiTable t;
  t.q = j.at("q").get<int>();
  t.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
  t.mi = j.at("mi").get<std::vector<double>>();
  return t;
}

template <typename Curve>
json curve_to_json(const Curve& c) {
  json pts = json::array();
  for (const auto& [x, y] : c.points) pts.push_back({x, y});
  return pts;
}

template <typename Curve>
void curve_from_json(const json& pts, Curve& c) {
  for (const auto& p : pts)
    c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
}

PsiTable build_psi_for(const SimConfig& config, int q) {
  std::vector<double> grid;
  for (double s = config.psi.snr_min_db; s <= config.psi.snr_max_db + 1e-9;
       s += config.psi.step_db)
    grid.push_back(s);
  return build_psi_table(q, grid, config.psi.n_symbols,
                         derive_seed(config.seeds.psi, q));
}

}  // namespace

ArtifactSet run_offline(const SimConfig& config, unsigned parts) {
  config.validate();
  const auto dir = config.resolved_artifact_dir();
  std::filesystem::create_directories(dir);

  ArtifactSet art;
  const auto qs = table_orders(config.mcs_table);

  // psi tables: needed by curves and VDBs as well
  for (const int q : qs) art.psi[q] = build_psi_for(config, q);
  if (parts & kOfflinePsi)
    for (const int q : qs) save_psi(art.psi[q], psi_path(dir, q));

  // LDPC codes, one per distinct (n, k)
  std::map<std::pair<int, int>, LdpcCode> by_nk;
  for (const auto& e : config.mcs_table.entries) {
    const int n = tb_code_length(config, e);
    const int k = static_cast<int>(std::lround(n * e.rate));
    auto it = by_nk.find({n, k});
    if (it == by_nk.end()) {
      LdpcCode code = build_code(n, e.rate, config.seeds.ldpc);
      it = by_nk.emplace(std::make_pair(n, k), std::move(code)).first;
      if (parts & kOfflineCodes)
        save_code(it->second, code_path(dir, n, k, config.seeds.ldpc));
    }
    art.codes[e.index] = it->second;
  }

  if (parts & (kOfflineExit | kOfflineSnrBler)) {
    const int n_idx = static_cast<int>(config.mcs_table.entries.size());
    std::vector<std::vector<McsSweepPoint>> sweeps(n_idx);
    std::vector<Constellation> consts;
    for (const auto& e : config.mcs_table.entries)
      consts.push_back(Constellation::make(e.q));
    parallel_for(n_idx, [&](int i) {
      const auto& e = config.mcs_table.entries[i];
      const auto sweep = default_mcs_sweep(art.psi.at(e.q), e.rate,
                                           config.curves.step_db);
      sweeps[i] = awgn_mcs_sweep(consts[i], art.codes.at(e.index), sweep,
                                 config.curves.n_blocks,
                                 derive_seed(config.seeds.curves, e.index));
    });
    json jexit, jsnr;
    for (int i = 0; i < n_idx; ++i) {
      const int idx = config.mcs_table.entries[i].index;
      art.exit_curves[idx] = exit_curve_from_sweep(idx, sweeps[i]);
      art.snr_curves[idx] = snr_bler_curve_from_sweep(idx, sweeps[i]);
      jexit[std::to_string(idx)] = curve_to_json(art.exit_curves[idx]);
      jsnr[std::to_string(idx)] = curve_to_json(art.snr_curves[idx]);
    }
    if (parts & kOfflineExit) {
      std::ofstream out(dir / "exit_curves.json");
      out << jexit.dump(2) << '\n';
      if (!out) throw StateError("run_offline: exit curve write failed");
    }
    if (parts & kOfflineSnrBler) {
      std::ofstream out(dir / "snr_bler_curves.json");
      out << jsnr.dump(2) << '\n';
      if (!out) throw StateError("run_offline: snr-bler curve write failed");
    }
  }

  if (parts & kOfflineVdb) {
    const int n_snr = static_cast<int>(config.snr_list_db.size());
    const int n_ue = config.channel.n_ue;
    const int n_ch = config.vdb.n_channels;
    for (const int q : qs) {
      const Constellation c = Constellation::make(q);
      const PsiTable& psi = art.psi.at(q);
      std::vector<VdbEntry> entries(
          static_cast<std::size_t>(n_ch) * n_snr * n_ue);
      parallel_for(n_ch, [&](int ch) {
        ChannelConfig ccfg = config.channel;
        ccfg.seed = derive_seed(config.seeds.vdb, q, ch);
        const ChannelRealization h = generate_channel(ccfg);
        std::vector<std::vector<std::uint8_t>> bits(n_ue);
        for (int si = 0; si < n_snr; ++si) {
          const double rho = db_to_linear(config.snr_list_db[si]);
          const NoiseModel noise = NoiseModel::from_es_n0(1.0, 1.0 / rho, n_ue);
          const Eigen::MatrixXd feats =
              features_from_gamma(lmmse_sinr_all(h, rho), psi);
          Rng rng(derive_seed(config.seeds.vdb, q, ch, 1000 + si));
          const std::size_t n_bits = static_cast<std::size_t>(
              config.tb.r_symbols * config.channel.n_subcarriers * c.s);
          for (int m = 0; m < n_ue; ++m) {
            bits[m].resize(n_bits);
            for (auto& b : bits[m]) b = rng.bit() ? 1 : 0;
          }
          const Eigen::ArrayXd mi = measured_post_mud_mi(
              h, noise, c, config.detector, config.tb, bits, rng);
          for (int m = 0; m < n_ue; ++m) {
            VdbEntry& e =
                entries[(static_cast<std::size_t>(ch) * n_snr + si) * n_ue + m];
            e.key.values = feats.row(m).transpose();
            e.value = mi(m);
          }
        }
      });
      const int d_vdb = static_cast<int>(entries.size());
      const int k_ivf =
          config.vdb.k_ivf > 0
              ? config.vdb.k_ivf
              : static_cast<int>(std::lround(4.0 * std::sqrt(d_vdb)));
      art.vdb[q] = build_ivfpq(entries, std::min(k_ivf, d_vdb),
                               config.vdb.d_sub,
                               derive_seed(config.seeds.vdb, q, 0xDB));
      save_index(art.vdb[q], vdb_path(dir, q));
    }
  }

  // manifest: config echo plus artifact inventory (no volatile fields)
  {
    json j;
    j["config"] = json::parse(config.to_json_text());
    json inv;
    for (const auto& [q, v] : art.vdb)
      inv["vdb_q" + std::to_string(q)] = v.size();
    j["inventory"] = inv;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
  }
  return art;
}

ArtifactSet load_artifacts(const SimConfig& config, unsigned parts) {
  const auto dir = config.resolved_artifact_dir();
  ArtifactSet art;
  const auto qs = table_orders(config.mcs_table);
  if (parts & kOfflinePsi)
    for (const int q : qs) art.psi[q] = load_psi(psi_path(dir, q));
  if (parts & kOfflineCodes) {
    for (const auto& e : config.mcs_table.entries) {
      const int n = tb_code_length(config, e);
      const int k = static_cast<int>(std::lround(n * e.rate));
      art.codes[e.index] = load_code(code_path(dir, n, k, config.seeds.ldpc));
    }
  }
  if (parts & kOfflineExit) {
    std::ifstream in(dir / "exit_curves.json");
    if (!in) throw StateError("load_artifacts: missing exit_curves.json");
    json j;
    in >> j;
    for (const auto& [key, pts] : j.items()) {
      ExitCurve c;
      c.mcs_index = std::stoi(key);
      curve_from_json(pts, c);
      art.exit_curves[c.mcs_index] = std::move(c);
    }
  }
  if (parts & kOfflineSnrBler) {
    std::ifstream in(dir / "snr_bler_curves.json");
    if (!in) throw StateError("load_artifacts: missing snr_bler_curves.json");
    json j;
    in >> j;
    for (const auto& [key, pts] : j.items()) {
      SnrBlerCurve c;
      c.mcs_index = std::stoi(key);
      curve_from_json(pts, c);
      art.snr_curves[c.mcs_index] = std::move(c);
    }
  }
  if (parts & kOfflineVdb)
    for (const int q : qs) art.vdb[q] = load_index(vdb_path(dir, q));
  return art;
}

namespace {

struct ChannelRunResult {
  std::vector<DecisionRow> rows;
  std::vector<std::int64_t> bits_per_user;
  std::map<int, std::int64_t> pmf;
  std::int64_t tb_sent = 0;
  std::int64_t tb_errors = 0;
};

ChannelRunResult run_channel(const SimConfig& config, Pipeline pipeline,
                             DetectorKind detector, const ArtifactSet& art,
                             const std::map<int, Constellation>& consts,
                             int si, int ch) {
  const double snr_db = config.snr_list_db[si];
  const double rho = db_to_linear(snr_db);
  const int n_ue = config.channel.n_ue;
  const NoiseModel noise = NoiseModel::from_es_n0(1.0, 1.0 / rho, n_ue);
  EpConfig det_cfg = config.detector;
  if (detector == DetectorKind::lmmse) det_cfg.t_iters = 1;

  ChannelRunResult res;
  res.bits_per_user.assign(n_ue, 0);

  const int n_frames = config.n_slots / config.mcs_update_period;
  for (int f = 0; f < n_frames; ++f) {
    const int slot_begin = f * config.mcs_update_period;
    const int slot_end = slot_begin + config.mcs_update_period;

    ChannelConfig ccfg = config.channel;
    ccfg.seed = derive_seed(config.seeds.eval, si, ch, slot_begin);
    ChannelRealization h_sel = generate_channel(ccfg);

    // per-user selection from the frame's first-slot channel
    std::vector<McsDecision> decisions(n_ue);
    for (int m = 0; m < n_ue; ++m) {
      switch (pipeline) {
        case Pipeline::zf_sinr:
          decisions[m] = select_mcs_zf(h_sel, rho, m, art.snr_curves,
                                       config.mcs_table, config.ref_bler);
          break;
        case Pipeline::lmmse_mi: {
          std::map<int, double> mi_per_q;
          for (const auto& [q, psi] : art.psi)
            mi_per_q[q] = predicted_mi_lmmse(h_sel, rho, q, psi, m);
          decisions[m] = select_mcs_mi(mi_per_q, art.exit_curves,
                                       config.mcs_table, config.ref_bler);
          break;
        }
        case Pipeline::vss_mi:
          decisions[m] = select_mcs_vss(
              h_sel, rho, m, art.vdb, art.psi, art.exit_curves,
              config.mcs_table, config.ref_bler, config.vdb.top_k,
              config.vdb.p_ivf);
          break;
      }
    }

    std::vector<DecisionRow> frame_rows(n_ue);
    for (int m = 0; m < n_ue; ++m) {
      DecisionRow& row = frame_rows[m];
      row.snr_db = snr_db;
      row.channel = ch;
      row.frame = f;
      row.slot_begin = slot_begin;
      row.slot_end = slot_end;
      row.user = m;
      const auto& d = decisions[m];
      row.mcs_index = d.selected ? *d.selected : -1;
      if (d.selected) {
        const auto& e = config.mcs_table.at(*d.selected);
        row.q = e.q;
        row.rate = e.rate;
        row.predicted_bler = d.predicted_bler;
        if (pipeline != Pipeline::zf_sinr)
          row.predicted_mi = d.predicted_mi_per_q.at(e.q);
      }
      ++res.pmf[row.mcs_index];
    }

    // transmit the frame
    std::vector<const Constellation*> users(n_ue, nullptr);
    std::vector<const LdpcCode*> codes(n_ue, nullptr);
    for (int m = 0; m < n_ue; ++m) {
      if (!decisions[m].selected) continue;
      const auto& e = config.mcs_table.at(*decisions[m].selected);
      users[m] = &consts.at(e.q);
      codes[m] = &art.codes.at(e.index);
    }

    std::vector<std::vector<std::uint8_t>> info(n_ue), cw(n_ue);
    for (int slot = slot_begin; slot < slot_end; ++slot) {
      ChannelRealization h_slot;
      const ChannelRealization* h_tx = &h_sel;
      if (slot != slot_begin) {
        ChannelConfig scfg = config.channel;
        scfg.seed = derive_seed(config.seeds.eval, si, ch, slot);
        h_slot = generate_channel(scfg);
        h_tx = &h_slot;
      }
      Rng rng(derive_seed(config.seeds.eval, si, ch, 0x51000 + slot));
      for (int m = 0; m < n_ue; ++m) {
        if (!users[m]) {
          info[m].clear();
          cw[m].clear();
          continue;
        }
        info[m].resize(codes[m]->k);
        for (auto& b : info[m]) b = rng.bit() ? 1 : 0;
        cw[m] = encode(*codes[m], info[m]);
      }
      const TbSimResult sim =
          simulate_tb(*h_tx, noise, users, det_cfg, config.tb, cw, rng);
      for (int m = 0; m < n_ue; ++m) {
        if (!users[m]) continue;
        ++frame_rows[m].tb_sent;
        ++res.tb_sent;
        const DecodeResult dec =
            decode(*codes[m], sim.llrs[m], codes[m]->max_bp_iters);
        const bool ok =
            std::equal(info[m].begin(), info[m].end(), dec.info.begin());
        if (ok) {
          frame_rows[m].bits_ok += codes[m]->k;
          res.bits_per_user[m] += codes[m]->k;
        } else {
          ++frame_rows[m].tb_errors;
          ++res.tb_errors;
        }
      }
    }
    for (auto& row : frame_rows) res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace

SimReport run_throughput(const SimConfig& config, Pipeline pipeline,
                         DetectorKind detector, const ArtifactSet& artifacts) {
  config.validate();
  if (artifacts.psi.empty() || artifacts.exit_curves.empty() ||
      artifacts.snr_curves.empty() || artifacts.codes.empty())
    throw StateError("run_throughput: artifacts missing");
  if (pipeline == Pipeline::vss_mi && artifacts.vdb.empty())
    throw StateError("run_throughput: VDB artifacts missing");

  std::map<int, Constellation> consts;
  for (const int q : table_orders(config.mcs_table))
    consts[q] = Constellation::make(q);

  SimReport report;
  report.pipeline = pipeline;
  report.detector = detector;
  report.n_slots = config.n_slots;
  report.n_ue = config.channel.n_ue;

  const int n_snr = static_cast<int>(config.snr_list_db.size());
  const int n_ch = config.n_eval_channels;
  const double slot_norm =
      static_cast<double>(config.n_slots) * kTslotSeconds * 1e6;

  for (int si = 0; si < n_snr; ++si) {
    std::vector<ChannelRunResult> results(n_ch);
    parallel_for(n_ch, [&](int ch) {
      results[ch] = run_channel(config, pipeline, detector, artifacts, consts,
                                si, ch);
    });
    SnrSummary sum;
    sum.snr_db = config.snr_list_db[si];
    for (int ch = 0; ch < n_ch; ++ch) {
      auto& r = results[ch];
      double tau_sys = 0.0;
      for (int m = 0; m < config.channel.n_ue; ++m) {
        const double tau_user =
            static_cast<double>(r.bits_per_user[m]) / slot_norm;
        sum.tau_user_mbps.push_back(tau_user);
        tau_sys += tau_user;
      }
      sum.tau_sys_mbps.push_back(tau_sys);
      for (const auto& [idx, cnt] : r.pmf) sum.mcs_pmf[idx] += cnt;
      sum.tb_sent += r.tb_sent;
      sum.tb_errors += r.tb_errors;
      for (auto& row : r.rows) report.rows.push_back(std::move(row));
    }
    double mean = 0.0;
    for (double t : sum.tau_sys_mbps) mean += t;
    sum.tau_sys_mean = sum.tau_sys_mbps.empty()
                           ? 0.0
                           : mean / static_cast<double>(sum.tau_sys_mbps.size());
    sum.realized_bler =
        sum.tb_sent > 0
            ? static_cast<double>(sum.tb_errors) / static_cast<double>(sum.tb_sent)
            : 0.0;
    report.per_snr.push_back(std::move(sum));
  }
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void emit_report(const SimReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path) {
  {
    std::ofstream csv(csv_path);
    if (!csv) throw StateError("emit_report: cannot open " + csv_path.string());
    csv << "snr_db,channel,frame,slot_begin,slot_end,user,pipeline,detector,"
           "mcs_index,q,rate,predicted_mi,predicted_bler,tb_sent,tb_errors,"
           "bits_ok\n";
    for (const auto& r : report.rows) {
      csv << fmt_double(r.snr_db) << ',' << r.channel << ',' << r.frame << ','
          << r.slot_begin << ',' << r.slot_end << ',' << r.user << ','
          << to_string(report.pipeline) << ',' << to_string(report.detector)
          << ',' << r.mcs_index << ',' << r.q << ',' << fmt_double(r.rate)
          << ',' << fmt_double(r.predicted_mi) << ','
          << fmt_double(r.predicted_bler) << ',' << r.tb_sent << ','
          << r.tb_errors << ',' << r.bits_ok << '\n';
    }
    if (!csv) throw StateError("emit_report: csv write failed");
  }
  json j;
  j["mcslab_run"] = true;
  j["pipeline"] = to_string(report.pipeline);
  j["detector"] = to_string(report.detector);
  j["t_slot_s"] = kTslotSeconds;
  j["n_slots"] = report.n_slots;
  j["n_ue"] = report.n_ue;
  json per_snr = json::array();
  for (const auto& s : report.per_snr) {
    json js;
    js["snr_db"] = s.snr_db;
    js["tau_sys_mbps_mean"] = s.tau_sys_mean;
    js["tau_sys_mbps_samples"] = s.tau_sys_mbps;
    js["tau_user_mbps_samples"] = s.tau_user_mbps;
    json pmf;
    for (const auto& [idx, cnt] : s.mcs_pmf) pmf[std::to_string(idx)] = cnt;
    js["mcs_pmf"] = pmf;
    js["tb_sent"] = s.tb_sent;
    js["tb_errors"] = s.tb_errors;
    js["realized_bler"] = s.realized_bler;
    per_snr.push_back(std::move(js));
  }
  j["per_snr"] = std::move(per_snr);
  std::ofstream out(json_path);
  if (!out) throw StateError("emit_report: cannot open " + json_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw StateError("emit_report: json write failed");
}

void merge_reports(const std::filesystem::path& in_dir,
                   const std::filesystem::path& out_json) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(in_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  json runs = json::array();
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      in >> j;
    } catch (...) {
      continue;
    }
    if (!j.is_object() || !j.value("mcslab_run", false)) continue;
    j["source"] = f.filename().string();
    runs.push_back(std::move(j));
  }
  json out;
  out["runs"] = std::move(runs);
  // cross-run mean system throughput per (pipeline, detector, snr)
  json table = json::array();
  for (const auto& r : out["runs"]) {
    for (const auto& s : r.at("per_snr")) {
      table.push_back({{"pipeline", r.at("pipeline")},
                       {"detector", r.at("detector")},
                       {"snr_db", s.at("snr_db")},
                       {"tau_sys_mbps_mean", s.at("tau_sys_mbps_mean")},
                       {"realized_bler", s.at("realized_bler")}});
    }
  }
  out["summary"] = std::move(table);
  std::ofstream o(out_json);
  if (!o) throw StateError("merge_reports: cannot open " + out_json.string());
  o << out.dump(2) << '\n';
}

}  // namespace mcslab
