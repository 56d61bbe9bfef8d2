#include "can/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace can {

std::string to_string(HeatmapTask t) { return t == HeatmapTask::Alsc ? "alsc" : "acd"; }

HeatmapTask parse_heatmap_task(std::string_view s) {
  if (s == "alsc") return HeatmapTask::Alsc;
  if (s == "acd") return HeatmapTask::Acd;
  throw ConfigError("unknown heatmap task '" + std::string(s) + "' (expected alsc or acd)");
}

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string escape_html(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string HeatmapDoc::to_html() const {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" << to_string(task)
     << " attention: " << escape_html(variant) << "</title>\n"
     << "<style>\ntable { border-collapse: collapse; margin-bottom: 1.5em; }\n"
     << "td, th { padding: 2px 5px; font-family: monospace; border: 1px solid #ddd; }\n"
     << "th { text-align: left; font-weight: normal; color: #555; }\n</style>\n</head>\n<body>\n";
  for (const auto& s : sentences) {
    os << "<h3>" << escape_html(s.id) << "</h3>\n<table>\n<tr><th>aspect</th><th>predicted</th><th>gold</th>";
    for (const auto& t : s.tokens) os << "<th>" << escape_html(t) << "</th>";
    os << "</tr>\n";
    for (const auto& r : s.rows) {
      os << "<tr><th>" << escape_html(r.label) << "</th><td>" << escape_html(r.predicted) << "</td><td>"
         << escape_html(r.gold) << "</td>";
      for (std::size_t i = 0; i < r.weights.size(); ++i) {
        const std::string w = fixed6(r.weights[i]);
        os << "<td style=\"background: rgba(200, 30, 30, " << w << ")\" data-weight=\"" << w << "\" title=\"" << w
           << "\">" << escape_html(s.tokens[i]) << "</td>";
      }
      os << "</tr>\n";
    }
    os << "</table>\n";
  }
  os << "</body>\n</html>\n";
  return os.str();
}

std::string HeatmapDoc::to_text() const {
  std::ostringstream os;
  for (const auto& s : sentences) {
    os << "# " << s.id << " [" << to_string(task) << "]\n";
    for (const auto& r : s.rows) {
      os << r.label << " predicted=" << r.predicted << " gold=" << r.gold << ":";
      for (std::size_t i = 0; i < r.weights.size(); ++i) os << ' ' << s.tokens[i] << '(' << fixed6(r.weights[i]) << ')';
      os << '\n';
    }
  }
  return os.str();
}

HeatmapDoc render_heatmaps(const Checkpoint& checkpoint, const std::vector<Instance>& instances, HeatmapTask task) {
  if (task == HeatmapTask::Acd && !checkpoint.model.multi_task) {
    throw ConfigError("checkpoint '" + checkpoint.variant + "' has no category detection head");
  }
  if (checkpoint.params.word_embeddings.value.rows() != static_cast<Eigen::Index>(checkpoint.vocab.size()) ||
      checkpoint.params.aspect_embeddings.value.rows() != static_cast<Eigen::Index>(checkpoint.inventory.size())) {
    throw DataError("checkpoint parameters do not match its vocabulary or category inventory");
  }
  HeatmapDoc doc;
  doc.task = task;
  doc.variant = checkpoint.variant;
  const auto usable = filter_for_mode(instances, checkpoint.mode);
  for (const auto& inst : usable) {
    const EncodedInstance enc = encode(inst, checkpoint.vocab, checkpoint.inventory, checkpoint.mode);
    const ForwardOutput out = infer(checkpoint.params, checkpoint.model, enc);
    HeatmapSentence s;
    s.id = inst.sentence.id;
    s.tokens = inst.sentence.tokens;
    const auto n_tokens = static_cast<Eigen::Index>(s.tokens.size());
    auto weights_of = [&](const Mat& m, Eigen::Index row) {
      std::vector<double> w(static_cast<std::size_t>(n_tokens));
      for (Eigen::Index j = 0; j < n_tokens; ++j) w[static_cast<std::size_t>(j)] = m(row, j);
      return w;
    };
    if (task == HeatmapTask::Alsc) {
      for (std::size_t k = 0; k < enc.categories.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        Eigen::Index best = 0;
        out.alsc_probs.row(row).maxCoeff(&best);
        s.rows.push_back({inst.mentions[k].category,
                          to_string(class_polarity(static_cast<int>(best), checkpoint.mode)),
                          to_string(inst.mentions[k].polarity), weights_of(out.alsc_attention, row)});
      }
    } else {
      const std::set<int> mentioned(enc.categories.begin(), enc.categories.end());
      for (std::size_t n = 0; n < checkpoint.inventory.size(); ++n) {
        const auto row = static_cast<Eigen::Index>(n);
        const double score = out.acd_scores(row, 0);
        s.rows.push_back({checkpoint.inventory.label(n), std::string(score >= 0.5 ? "yes " : "no ") + fixed6(score),
                          mentioned.count(static_cast<int>(n)) ? "yes" : "no", weights_of(out.acd_attention, row)});
      }
    }
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {

RunSummary summarize(const std::string& name, const History& h) {
  RunSummary r;
  r.name = name;
  r.variant = h.variant;
  r.mode = h.mode;
  r.epochs = static_cast<int>(h.epochs.size());
  for (const auto& e : h.epochs) {
    if (r.best_epoch == 0 || e.val_acc > r.val_acc) {
      r.best_epoch = e.epoch;
      r.val_acc = e.val_acc;
      r.val_f1 = e.val_f1;
    }
  }
  if (!h.epochs.empty()) {
    r.final_reg_sparse = h.epochs.back().reg_sparse;
    r.final_reg_orthogonal = h.epochs.back().reg_orthogonal;
  }
  return r;
}

}  // namespace

Comparison compare_runs(const std::vector<std::pair<std::string, History>>& runs) {
  if (runs.empty()) throw std::invalid_argument("compare_runs: no history given");
  Comparison c;
  const Mode reference = runs.front().second.mode;
  for (const auto& [name, history] : runs) {
    auto it = std::find_if(c.groups.begin(), c.groups.end(),
                           [&](const ModeGroup& g) { return g.mode == history.mode; });
    if (it == c.groups.end()) {
      c.groups.push_back({history.mode, {}, {}});
      it = std::prev(c.groups.end());
    }
    it->runs.push_back(summarize(name, history));
    it->histories.push_back(history);
    if (history.mode != reference) {
      c.warnings.push_back("run '" + name + "' uses mode " + to_string(history.mode) + ", not " +
                           to_string(reference) + "; reported separately");
    }
  }
  return c;
}

std::string Comparison::table_tsv() const {
  std::ostringstream os;
  os << "run\tvariant\tmode\tepochs\tbest_epoch\tval_acc\tval_f1\tfinal_R_s\tfinal_R_o\n";
  for (const auto& g : groups) {
    for (const auto& r : g.runs) {
      os << r.name << '\t' << r.variant << '\t' << to_string(r.mode) << '\t' << r.epochs << '\t' << r.best_epoch
         << '\t' << format_g(r.val_acc) << '\t' << format_g(r.val_f1) << '\t' << format_g(r.final_reg_sparse)
         << '\t' << format_g(r.final_reg_orthogonal) << '\n';
    }
  }
  return os.str();
}

std::string Comparison::curves_tsv() const {
  std::ostringstream os;
  for (const auto& g : groups) {
    os << "# mode=" << to_string(g.mode) << '\n' << "epoch";
    std::size_t longest = 0;
    for (std::size_t i = 0; i < g.runs.size(); ++i) {
      const auto& n = g.runs[i].name;
      os << '\t' << n << ".val_acc\t" << n << ".R_s\t" << n << ".R_o";
      longest = std::max(longest, g.histories[i].epochs.size());
    }
    os << '\n';
    for (std::size_t e = 0; e < longest; ++e) {
      os << e + 1;
      for (const auto& h : g.histories) {
        if (e < h.epochs.size()) {
          const auto& rec = h.epochs[e];
          os << '\t' << format_g(rec.val_acc) << '\t' << format_g(rec.reg_sparse) << '\t'
             << format_g(rec.reg_orthogonal);
        } else {
          os << "\t\t\t";
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace can
