#pragma once
// relational side of the store: plain tables plus one session table whose
// rows carry ranking-distance models

#include <map>
#include <string>
#include <vector>

#include "prefdb/labels.hpp"
#include "prefdb/model.hpp"

namespace prefdb {

struct Relation {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == column) return static_cast<int>(i);
    return -1;
  }
};

struct Session {
  std::vector<std::string> key;  // values of the session key columns
  std::string id;                // key values joined with '|'
  MallowsModel model;
};

struct PreferenceDatabase {
  std::map<std::string, Relation> o_relations;
  std::string p_relation;                    // name of the session table
  std::vector<std::string> session_columns;  // its key attributes
  std::vector<Session> sessions;
  std::string item_relation;  // o-relation whose first column lists the items
  std::vector<std::string> label_attributes;

  const Relation& relation(const std::string& name) const;
  std::vector<ItemId> items() const;  // first column of the item relation
  // one label "attr=value" per designated attribute value an item holds
  LabelingFunction labeling() const;
};

}  // namespace prefdb
