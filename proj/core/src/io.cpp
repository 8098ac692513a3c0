#include "prefdb/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "prefdb/error.hpp"

namespace fs = std::filesystem;

namespace prefdb {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    std::size_t next = s.find(sep, at);
    if (next == std::string::npos) {
      out.push_back(trim(s.substr(at)));
      return out;
    }
    out.push_back(trim(s.substr(at, next - at)));
    at = next + 1;
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

bool is_comment_or_blank(const std::string& line) {
  std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

Ranking parse_chain(const std::string& text, const std::string& what) {
  std::vector<std::string> parts = split(text, '>');
  std::vector<ItemId> items;
  for (auto& p : parts) {
    if (p.empty()) throw Error("empty item in " + what + " '" + text + "'");
    items.push_back(p);
  }
  return Ranking(items);
}

}  // namespace

const Relation& PreferenceDatabase::relation(const std::string& name) const {
  auto it = o_relations.find(name);
  if (it == o_relations.end()) throw Error("unknown relation '" + name + "'");
  return it->second;
}

std::vector<ItemId> PreferenceDatabase::items() const {
  const Relation& rel = relation(item_relation);
  std::vector<ItemId> out;
  std::set<ItemId> seen;
  for (const auto& row : rel.rows) {
    if (row.empty()) continue;
    if (!seen.insert(row[0]).second)
      throw Error("duplicate item '" + row[0] + "' in relation '" +
                  item_relation + "'");
    out.push_back(row[0]);
  }
  return out;
}

LabelingFunction PreferenceDatabase::labeling() const {
  const Relation& rel = relation(item_relation);
  LabelingFunction lam;
  for (const auto& attr : label_attributes) {
    int col = rel.column_index(attr);
    if (col < 0)
      throw Error("label attribute '" + attr + "' is not a column of '" +
                  item_relation + "'");
    for (const auto& row : rel.rows)
      lam.add(row[0], attr + "=" + row[col]);
  }
  return lam;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

Relation load_csv(const std::string& path) {
  Relation rel;
  rel.name = fs::path(path).stem().string();
  std::vector<std::string> lines = lines_of(read_text_file(path));
  bool have_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    std::vector<std::string> cells = split(lines[i], ',');
    if (!have_header) {
      rel.columns = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != rel.columns.size())
      throw Error(path + ":" + std::to_string(i + 1) + ": expected " +
                  std::to_string(rel.columns.size()) + " cells, found " +
                  std::to_string(cells.size()));
    rel.rows.push_back(std::move(cells));
  }
  if (!have_header) throw Error(path + ": missing header row");
  return rel;
}

void write_csv(const Relation& rel, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < rel.columns.size(); ++i) {
    if (i) out += ",";
    out += rel.columns[i];
  }
  out += "\n";
  for (const auto& row : rel.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += row[i];
    }
    out += "\n";
  }
  write_text_file(path, out);
}

namespace {

std::map<std::string, std::string> parse_keyvalues(const std::string& path) {
  std::map<std::string, std::string> out;
  std::vector<std::string> lines = lines_of(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    std::size_t eq = lines[i].find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(i + 1) +
                  ": expected 'key = value'");
    std::string key = trim(lines[i].substr(0, eq));
    std::string value = trim(lines[i].substr(eq + 1));
    if (key.empty()) throw Error(path + ":" + std::to_string(i + 1) + ": empty key");
    out[key] = value;
  }
  return out;
}

}  // namespace

PreferenceDatabase load_database(const std::string& dir) {
  fs::path root(dir);
  fs::path manifest = root / "manifest.txt";
  if (!fs::exists(manifest))
    throw Error("missing manifest: '" + manifest.string() + "'");
  auto kv = parse_keyvalues(manifest.string());

  PreferenceDatabase db;
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw Error("manifest is missing the '" + key + "' entry");
    return it->second;
  };
  db.p_relation = need("p_relation");
  db.item_relation = need("item_relation");

  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".csv") {
      Relation rel = load_csv(entry.path().string());
      db.o_relations.emplace(rel.name, std::move(rel));
    }
  }
  if (!db.o_relations.count(db.item_relation))
    throw Error("item relation '" + db.item_relation + "' has no csv file");

  if (auto it = kv.find("label_attributes"); it != kv.end()) {
    for (auto& a : split(it->second, ','))
      if (!a.empty()) db.label_attributes.push_back(a);
  } else {
    const Relation& rel = db.o_relations.at(db.item_relation);
    for (std::size_t c = 1; c < rel.columns.size(); ++c)
      db.label_attributes.push_back(rel.columns[c]);
  }

  // session table
  fs::path models = root / (db.p_relation + ".models");
  if (!fs::exists(models))
    throw Error("missing session table: '" + models.string() + "'");
  std::vector<ItemId> universe = db.items();
  std::set<ItemId> universe_set(universe.begin(), universe.end());

  std::vector<std::string> lines = lines_of(read_text_file(models.string()));
  bool have_header = false;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    std::vector<std::string> cells = split(lines[i], ',');
    if (!have_header) {
      if (cells.size() < 2 || cells[cells.size() - 2] != "phi" ||
          cells.back() != "sigma")
        throw Error(models.string() +
                    ": header must end with 'phi,sigma' after the key columns");
      db.session_columns.assign(cells.begin(), cells.end() - 2);
      have_header = true;
      continue;
    }
    if (cells.size() != db.session_columns.size() + 2)
      throw Error(models.string() + ":" + std::to_string(i + 1) +
                  ": expected " + std::to_string(db.session_columns.size() + 2) +
                  " cells");
    Session s;
    s.key.assign(cells.begin(), cells.end() - 2);
    for (std::size_t k = 0; k < s.key.size(); ++k) {
      if (k) s.id += "|";
      s.id += s.key[k];
    }
    if (!ids.insert(s.id).second)
      throw Error(models.string() + ":" + std::to_string(i + 1) +
                  ": duplicate session id '" + s.id + "'");
    double phi;
    try {
      phi = std::stod(cells[cells.size() - 2]);
    } catch (const std::exception&) {
      throw Error(models.string() + ":" + std::to_string(i + 1) +
                  ": bad phi value '" + cells[cells.size() - 2] + "'");
    }
    Ranking sigma = parse_chain(cells.back(), "sigma");
    if (sigma.size() != static_cast<int>(universe.size()))
      throw Error(models.string() + ":" + std::to_string(i + 1) +
                  ": sigma ranks " + std::to_string(sigma.size()) +
                  " items but the item relation lists " +
                  std::to_string(universe.size()));
    for (int r = 1; r <= sigma.size(); ++r)
      if (!universe_set.count(sigma.at(r)))
        throw Error(models.string() + ":" + std::to_string(i + 1) +
                    ": sigma item '" + sigma.at(r) + "' is not in the item relation");
    s.model = MallowsModel{std::move(sigma), phi};
    db.sessions.push_back(std::move(s));
  }
  if (!have_header)
    throw Error(models.string() + ": missing header row");
  return db;
}

MallowsModel load_model_file(const std::string& path) {
  auto kv = parse_keyvalues(path);
  auto it_phi = kv.find("phi");
  auto it_sigma = kv.find("sigma");
  if (it_phi == kv.end() || it_sigma == kv.end())
    throw Error(path + ": model file needs 'phi' and 'sigma' entries");
  double phi;
  try {
    phi = std::stod(it_phi->second);
  } catch (const std::exception&) {
    throw Error(path + ": bad phi value '" + it_phi->second + "'");
  }
  return MallowsModel{parse_chain(it_sigma->second, "sigma"), phi};
}

void write_model_file(const MallowsModel& model, const std::string& path) {
  char phi[64];
  std::snprintf(phi, sizeof phi, "%.17g", model.phi);
  std::string out = "phi = " + std::string(phi) + "\nsigma = ";
  for (int r = 1; r <= model.sigma.size(); ++r) {
    if (r > 1) out += " > ";
    out += model.sigma.at(r);
  }
  out += "\n";
  write_text_file(path, out);
}

LabelingFunction load_labels_file(const std::string& path) {
  LabelingFunction lam;
  std::vector<std::string> lines = lines_of(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    std::size_t colon = lines[i].find(':');
    if (colon == std::string::npos)
      throw Error(path + ":" + std::to_string(i + 1) +
                  ": expected 'item: label, label'");
    std::string item = trim(lines[i].substr(0, colon));
    if (item.empty())
      throw Error(path + ":" + std::to_string(i + 1) + ": empty item");
    for (auto& label : split(lines[i].substr(colon + 1), ','))
      if (!label.empty()) lam.add(item, label);
  }
  return lam;
}

void write_labels_file(const LabelingFunction& lam, const std::string& path) {
  std::string out;
  for (const auto& [item, labels] : lam.entries()) {
    out += item + ": ";
    bool first = true;
    for (const auto& l : labels) {
      if (!first) out += ", ";
      first = false;
      out += l;
    }
    out += "\n";
  }
  write_text_file(path, out);
}

PatternUnion load_pattern_file(const std::string& path) {
  return parse_pattern_union(read_text_file(path));
}

PartialOrder load_condition_file(const std::string& path) {
  std::vector<std::pair<ItemId, ItemId>> pairs;
  std::vector<std::string> lines = lines_of(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    Ranking chain = parse_chain(trim(lines[i]), "condition");
    for (int r = 1; r < chain.size(); ++r)
      pairs.emplace_back(chain.at(r), chain.at(r + 1));
  }
  return PartialOrder(pairs);
}

}  // namespace prefdb
