#pragma once
// file formats: database directories, model/label/pattern/condition files

#include <string>

#include "prefdb/database.hpp"
#include "prefdb/labels.hpp"
#include "prefdb/model.hpp"
#include "prefdb/pattern.hpp"
#include "prefdb/ranking.hpp"

namespace prefdb {

// Directory layout:
//   manifest.txt     key = value lines: p_relation, item_relation, and
//                    optionally label_attributes (comma-separated; defaults
//                    to every non-key column of the item relation)
//   <Name>.csv       one file per o-relation, header row first
//   <PRel>.models    header "key1,key2,...,phi,sigma", one session per row,
//                    sigma written as item>item>...
PreferenceDatabase load_database(const std::string& dir);

// model file: "phi = 0.3" and "sigma = a > b > c" lines
MallowsModel load_model_file(const std::string& path);
void write_model_file(const MallowsModel& model, const std::string& path);

// labels file: "item: label, label" lines
LabelingFunction load_labels_file(const std::string& path);
void write_labels_file(const LabelingFunction& lam, const std::string& path);

// pattern file: parse_pattern_union text
PatternUnion load_pattern_file(const std::string& path);

// condition file: lines of chains "a > b > c", all constraints conjoined
PartialOrder load_condition_file(const std::string& path);

Relation load_csv(const std::string& path);
void write_csv(const Relation& rel, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace prefdb
