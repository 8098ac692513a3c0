#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "prefdb/benchgen.hpp"
#include "prefdb/engine.hpp"
#include "prefdb/error.hpp"
#include "prefdb/exact.hpp"
#include "prefdb/io.hpp"

using namespace prefdb;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory, removed when the test ends
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("prefdb_wb_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("model files round trip") {
  TempDir tmp;
  MallowsModel model(Ranking({"pear", "apple", "plum"}), 0.35);
  write_model_file(model, tmp.file("m.txt"));
  MallowsModel back = load_model_file(tmp.file("m.txt"));
  CHECK(back.sigma == model.sigma);
  CHECK(back.phi == doctest::Approx(model.phi).epsilon(1e-15));

  write_text_file(tmp.file("bad.txt"), "sigma = a > b\n");
  CHECK_THROWS_AS(load_model_file(tmp.file("bad.txt")), Error);
  write_text_file(tmp.file("bad2.txt"), "phi = 0.5\nsigma = a > a\n");
  CHECK_THROWS_AS(load_model_file(tmp.file("bad2.txt")), Error);
  CHECK_THROWS_AS(load_model_file(tmp.file("missing.txt")), Error);
}

TEST_CASE("label files round trip") {
  TempDir tmp;
  LabelingFunction lam;
  lam.add("a", "fruit");
  lam.add("a", "green");
  lam.add("b", "fruit");
  write_labels_file(lam, tmp.file("l.txt"));
  LabelingFunction back = load_labels_file(tmp.file("l.txt"));
  CHECK(back.carries_all("a", {"fruit", "green"}));
  CHECK(back.carries_all("b", {"fruit"}));
  CHECK(!back.carries_all("b", {"green"}));
  CHECK(back.entries() == lam.entries());
}

TEST_CASE("pattern and condition files load") {
  TempDir tmp;
  write_text_file(tmp.file("p.txt"),
                  "# two alternatives\n"
                  "A > B & B > C\n"
                  "\n"
                  "{A,B} > C\n");
  PatternUnion g = load_pattern_file(tmp.file("p.txt"));
  REQUIRE(g.patterns.size() == 2);
  CHECK(g.patterns[0].edges().size() == 2);
  CHECK(g.patterns[1].size() == 2);

  write_text_file(tmp.file("c.txt"), "a > b > c\nd > b\n");
  PartialOrder u = load_condition_file(tmp.file("c.txt"));
  CHECK(is_consistent(Ranking({"a", "d", "b", "c"}), u));
  CHECK(!is_consistent(Ranking({"a", "b", "d", "c"}), u));
  CHECK(!is_consistent(Ranking({"b", "a", "d", "c"}), u));
}

TEST_CASE("csv files round trip") {
  TempDir tmp;
  Relation rel{"Books", {"id", "title", "year"}, {{"1", "Dune", "1965"},
                                                  {"2", "Solaris", "1961"}}};
  write_csv(rel, tmp.file("Books.csv"));
  Relation back = load_csv(tmp.file("Books.csv"));
  CHECK(back.columns == rel.columns);
  CHECK(back.rows == rel.rows);
  CHECK(back.column_index("year") == 2);
  CHECK(back.column_index("nope") == -1);
}

TEST_CASE("database directories load") {
  TempDir tmp;
  write_text_file(tmp.file("manifest.txt"),
                  "p_relation=P\n"
                  "item_relation=C\n"
                  "label_attributes=party,sex\n");
  write_text_file(tmp.file("C.csv"),
                  "candidate,party,sex,age,edu,reg\n"
                  "Trump,R,M,70,BS,NE\n"
                  "Clinton,D,F,69,JD,NE\n"
                  "Sanders,D,M,75,BS,NE\n"
                  "Rubio,R,M,45,JD,S\n");
  write_text_file(tmp.file("V.csv"),
                  "voter,sex,age,edu\n"
                  "Ann,F,20,BS\n"
                  "Bob,M,30,BS\n");
  write_text_file(tmp.file("P.models"),
                  "voter,date,phi,sigma\n"
                  "Ann,5/5,0.3,Clinton>Sanders>Rubio>Trump\n"
                  "Bob,5/5,0.3,Trump>Rubio>Sanders>Clinton\n");

  PreferenceDatabase db = load_database(tmp.str());
  CHECK(db.p_relation == "P");
  CHECK(db.item_relation == "C");
  CHECK(db.session_columns == std::vector<std::string>{"voter", "date"});
  CHECK(db.items() == std::vector<ItemId>{"Trump", "Clinton", "Sanders",
                                          "Rubio"});
  REQUIRE(db.sessions.size() == 2);
  CHECK(db.sessions[0].id == "Ann|5/5");
  CHECK(db.sessions[0].model.phi == doctest::Approx(0.3));
  CHECK(db.sessions[0].model.sigma ==
        Ranking({"Clinton", "Sanders", "Rubio", "Trump"}));

  // the labeling exposes the chosen attributes only
  LabelingFunction lam = db.labeling();
  CHECK(lam.carries_all("Trump", {"party=R", "sex=M"}));
  CHECK(!lam.has("Trump", "age=70"));

  // a loaded database answers queries
  EvalResult r = evaluate(
      parse_query("Q() <- P(_,_;c1;c2), C(c1,_,'F',_,_,_), C(c2,_,'M',_,_,_)"),
      db);
  CHECK(r.sessions.size() == 2);
  CHECK(r.probability > 0.0);
  CHECK(r.probability <= 1.0);
}

TEST_CASE("database loading rejects broken inputs") {
  TempDir tmp;
  CHECK_THROWS_AS(load_database(tmp.file("absent")), Error);

  auto write_base = [&](const std::string& models) {
    write_text_file(tmp.file("manifest.txt"),
                    "p_relation=P\nitem_relation=C\n");
    write_text_file(tmp.file("C.csv"), "candidate,party\na,X\nb,Y\n");
    write_text_file(tmp.file("P.models"), models);
  };
  write_base("voter,phi,sigma\nv1,0.5,a>zorro\n");
  CHECK_THROWS_AS(load_database(tmp.str()), Error);
  write_base("voter,phi,sigma\nv1,0.5,a>b\nv1,0.5,b>a\n");
  CHECK_THROWS_AS(load_database(tmp.str()), Error);
  write_base("voter,sigma,phi\nv1,a>b,0.5\n");
  CHECK_THROWS_AS(load_database(tmp.str()), Error);
  write_base("voter,phi,sigma\nv1,1.5,a>b\n");
  CHECK_THROWS_AS(load_database(tmp.str()), Error);
  // a correct file still loads after all those rewrites
  write_base("voter,phi,sigma\nv1,0.5,a>b\n");
  CHECK(load_database(tmp.str()).sessions.size() == 1);
}

TEST_CASE("workload family A has the documented shape") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::A;
  auto made = generate_benchmark(spec, tmp.str());
  REQUIRE(made.size() == 33);
  CHECK(made[0].name == "a_01");
  CHECK(made[32].name == "a_33");

  for (const auto& inst : made) {
    MallowsModel model = load_model_file(inst.dir + "/model.txt");
    CHECK(model.sigma.size() == 15);
    CHECK(model.phi == doctest::Approx(0.1));
    LabelingFunction lam = load_labels_file(inst.dir + "/labels.txt");
    for (const char* label : {"A", "B", "C", "D"}) {
      std::size_t count = 0;
      for (const auto& [item, labels] : lam.entries())
        if (labels.count(label)) ++count;
      CHECK(count == 3);
    }
    PatternUnion g = load_pattern_file(inst.dir + "/patterns.txt");
    REQUIRE(g.patterns.size() == 3);
    for (const auto& p : g.patterns) {
      CHECK(p.size() == 2);
      CHECK(p.edges().size() == 1);
    }
  }

  // the union is solvable by both insertion solvers, and they agree
  MallowsModel model = load_model_file(made[0].dir + "/model.txt");
  LabeledModel lm(model, load_labels_file(made[0].dir + "/labels.txt"));
  PatternUnion g = load_pattern_file(made[0].dir + "/patterns.txt");
  double two = two_label_solver(g, lm).probability;
  double bip = bipartite_solver(g, lm).probability;
  CHECK(two == doctest::Approx(bip).epsilon(1e-12));
  CHECK(two > 0.0);
  CHECK(two < 1.0);
}

TEST_CASE("workloads are deterministic in the seed") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::A;
  auto first = generate_benchmark(spec, tmp.file("one"));
  auto second = generate_benchmark(spec, tmp.file("two"));
  REQUIRE(first.size() == second.size());
  bool all_equal = true;
  for (std::size_t i = 0; i < first.size(); ++i)
    for (const char* f : {"/model.txt", "/labels.txt", "/patterns.txt"})
      if (read_text_file(first[i].dir + f) != read_text_file(second[i].dir + f))
        all_equal = false;
  CHECK(all_equal);

  spec.seed = 43;
  auto third = generate_benchmark(spec, tmp.file("three"));
  bool any_diff = false;
  for (std::size_t i = 0; i < first.size(); ++i)
    for (const char* f : {"/model.txt", "/labels.txt", "/patterns.txt"})
      if (read_text_file(first[i].dir + f) != read_text_file(third[i].dir + f))
        any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("grid families produce the documented instance counts") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::B;
  CHECK(generate_benchmark(spec, tmp.file("b")).size() == 1080);
  spec.family = BenchmarkFamily::C;
  CHECK(generate_benchmark(spec, tmp.file("c")).size() == 1080);
  spec.family = BenchmarkFamily::D;
  CHECK(generate_benchmark(spec, tmp.file("d")).size() == 600);
}

TEST_CASE("grid cells control the generated shapes") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::B;
  spec.items = {20};
  spec.patterns_per_union = {2};
  spec.labels_per_pattern = {4};
  spec.items_per_label = {3};
  spec.instances_per_cell = 2;
  auto made = generate_benchmark(spec, tmp.file("b"));
  REQUIRE(made.size() == 2);
  CHECK(made[0].name == "b_m020_p2_l4_i3_r01");
  for (const auto& inst : made) {
    CHECK(load_model_file(inst.dir + "/model.txt").sigma.size() == 20);
    PatternUnion g = load_pattern_file(inst.dir + "/patterns.txt");
    REQUIRE(g.patterns.size() == 2);
    for (const auto& p : g.patterns) CHECK(p.size() == 4);
    // both patterns share one edge relation over their label slots
    CHECK(g.patterns[0].edges() == g.patterns[1].edges());
  }

  spec.family = BenchmarkFamily::C;
  spec.items = {12};
  spec.labels_per_pattern = {3};
  auto bips = generate_benchmark(spec, tmp.file("c"));
  for (const auto& inst : bips) {
    PatternUnion g = load_pattern_file(inst.dir + "/patterns.txt");
    CHECK(classify(g) != PatternClass::General);
  }

  spec.family = BenchmarkFamily::D;
  spec.items = {30};
  spec.patterns_per_union = {3};
  spec.items_per_label = {5};
  auto singles = generate_benchmark(spec, tmp.file("d"));
  REQUIRE(singles.size() == 2);
  for (const auto& inst : singles) {
    CHECK(load_model_file(inst.dir + "/model.txt").phi ==
          doctest::Approx(0.5));
    PatternUnion g = load_pattern_file(inst.dir + "/patterns.txt");
    REQUIRE(g.patterns.size() == 3);
    for (const auto& p : g.patterns) {
      CHECK(p.size() == 2);
      CHECK(p.edges().size() == 1);
    }
    CHECK(classify(g) == PatternClass::TwoLabel);
  }

  // a label cannot ask for more distinct items than the universe holds
  spec.family = BenchmarkFamily::B;
  spec.items = {3};
  spec.items_per_label = {7};
  CHECK_THROWS_AS(generate_benchmark(spec, tmp.file("bad")), Error);
}

TEST_CASE("poll workload is a loadable database") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::Polls;
  spec.polls_voters = 60;
  auto made = generate_benchmark(spec, tmp.str());
  REQUIRE(made.size() == 1);

  PreferenceDatabase db = load_database(made[0].dir);
  CHECK(db.p_relation == "Polls");
  CHECK(db.item_relation == "Candidates");
  CHECK(db.session_columns == std::vector<std::string>{"voter", "date"});
  CHECK(db.items().size() == 16);
  CHECK(db.relation("Voters").rows.size() == 60);
  REQUIRE(db.sessions.size() == 60);

  const Relation& voters = db.relation("Voters");
  std::set<std::string> seen_phi;
  for (const auto& s : db.sessions) {
    CHECK(s.model.sigma.size() == 16);
    CHECK((s.key[1] == "5/5" || s.key[1] == "6/5"));
    double phi = s.model.phi;
    CHECK((phi == 0.2 || phi == 0.5 || phi == 0.8));
    seen_phi.insert(std::to_string(phi));
    // every session's voter exists
    bool found = false;
    for (const auto& row : voters.rows)
      if (row[0] == s.key[0]) found = true;
    CHECK(found);
  }
  CHECK(seen_phi.size() >= 2);  // 60 draws across three dispersions

  // demographic queries run end to end on the generated data
  EvalResult r = evaluate(
      parse_query("Q() <- Polls(_,_;l;r), Candidates(l,p,'M',_,_,_), "
                  "Candidates(r,p,'F',_,_,_)"),
      db);
  CHECK(r.sessions.size() == 60);
  CHECK(r.probability >= 0.0);
  CHECK(r.probability <= 1.0);
  CHECK(r.expected_count > 0.0);

  // defaults follow the documented sizes
  CHECK(BenchmarkSpec{}.polls_voters == 1000);
  CHECK(BenchmarkSpec{}.polls_candidates == 16);
}

TEST_CASE("generated instances solve consistently after a reload") {
  TempDir tmp;
  BenchmarkSpec spec;
  spec.family = BenchmarkFamily::C;
  spec.items = {8};
  spec.patterns_per_union = {2};
  spec.labels_per_pattern = {3};
  spec.items_per_label = {2};
  spec.instances_per_cell = 3;
  auto made = generate_benchmark(spec, tmp.str());
  for (const auto& inst : made) {
    LabeledModel lm(load_model_file(inst.dir + "/model.txt"),
                    load_labels_file(inst.dir + "/labels.txt"));
    PatternUnion g = load_pattern_file(inst.dir + "/patterns.txt");
    MarginalResult pruned = bipartite_solver(g, lm);
    double oracle = oracle_marginal(g, lm);
    CHECK(pruned.probability == doctest::Approx(oracle).epsilon(1e-9));
  }
}
