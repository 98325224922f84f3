#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nli/rng.hpp"
#include "nli/rules.hpp"
#include "support/stub_scorer.hpp"

using namespace nli;
using nli::testing::make_sentence;
using nli::testing::StubScorer;

namespace {

const char* kTableRules =
    "r1: true => ent(X1,X1)\n"
    "r2: con(X1,X2) => con(X2,X1)\n"
    "r3: ent(X1,X2) => ~con(X2,X1)\n"
    "r4: neu(X1,X2) => ~con(X2,X1)\n"
    "r5: ent(X1,X2) & ent(X2,X3) => ent(X1,X3)\n";

Substitution bind2(const Sentence& s1, const Sentence& s2) {
  return Substitution{{"X1", s1}, {"X2", s2}};
}

}  // namespace

TEST_CASE("parse_rules reads the shipped rule forms") {
  const RuleSet rs = parse_rules(kTableRules);
  REQUIRE(rs.rules.size() == 5);

  const Rule& r1 = rs.rules[0];
  CHECK(r1.name == "r1");
  CHECK(r1.body.empty());
  CHECK(r1.head.atom.pred == Predicate::ent);
  CHECK(r1.head.atom.arg1 == "X1");
  CHECK(r1.head.atom.arg2 == "X1");
  CHECK(!r1.head.negated);

  const Rule& r2 = rs.rules[1];
  CHECK(r2.body.size() == 1);
  CHECK(r2.body[0].pred == Predicate::con);
  CHECK(r2.head.atom.arg1 == "X2");
  CHECK(r2.head.atom.arg2 == "X1");

  const Rule& r3 = rs.rules[2];
  CHECK(r3.head.negated);

  const Rule& r5 = rs.rules[4];
  CHECK(r5.body.size() == 2);
  CHECK(r5.variables() == std::vector<std::string>{"X1", "X2", "X3"});
}

TEST_CASE("parse_rules accepts comments and flexible whitespace") {
  const RuleSet rs = parse_rules("# comment line\n  sym :  con( A , B )=>con(B,A) # inline\n");
  REQUIRE(rs.rules.size() == 1);
  CHECK(rs.rules[0].name == "sym");
  CHECK(rs.rules[0].body[0].arg1 == "A");
}

TEST_CASE("parse_rules rejects bad input with positions") {
  CHECK_THROWS_AS(parse_rules("r: foo(X1,X2) => con(X2,X1)\n"), parse_error);
  CHECK_THROWS_AS(parse_rules("r: con(X1,X2) =>\n"), parse_error);
  CHECK_THROWS_AS(parse_rules("r: con(X1,X2) => con(X1,X3)\n"), parse_error);  // unbound head
  CHECK_THROWS_AS(parse_rules("r: true => ~~ent(X1,X1)\n"), parse_error);
  CHECK_THROWS_AS(parse_rules("a: true => ent(X,X)\na: true => ent(Y,Y)\n"), parse_error);
  CHECK_THROWS_AS(
      parse_rules("r: ent(X1,X2) & ent(X3,X4) => ent(X1,X4)\n"),  // 4 variables
      parse_error);
  try {
    parse_rules("ok: true => ent(X,X)\nbad: con(X1,X2) = con(X2,X1)\n");
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("rule DSL round-trips through to_dsl") {
  const RuleSet rs = parse_rules(kTableRules);
  const RuleSet again = parse_rules(to_dsl(rs));
  REQUIRE(again.rules.size() == rs.rules.size());
  CHECK(to_dsl(again) == to_dsl(rs));
}

TEST_CASE("atom, body, and head probabilities from stub tables") {
  const Sentence s1 = make_sentence("a b");
  const Sentence s2 = make_sentence("c d");
  StubScorer stub;
  stub.set("a b", "c d", 0.1, 0.9, 0.0);
  stub.set("c d", "a b", 0.3, 0.2, 0.5);
  const Substitution s = bind2(s1, s2);

  const RuleSet rs = parse_rules(kTableRules);
  const Rule& r2 = rs.rules[1];

  CHECK(atom_probability(stub, r2.body[0], s) == doctest::Approx(0.9));
  CHECK(atom_probability(stub, r2.head.atom, s) == doctest::Approx(0.2));

  // Uniform fallback covers unknown pairs.
  const Atom ent_atom{Predicate::ent, "X1", "X1"};
  Substitution self{{"X1", make_sentence("zz")}};
  CHECK(atom_probability(stub, ent_atom, self) == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(atom_probability(stub, ent_atom, Substitution{}), grounding_error);
}

TEST_CASE("body probability is the Goedel minimum") {
  StubScorer stub;
  stub.set("a", "b", 0.9, 0.9, 0.0);   // ent(X1,X2) = 0.9
  stub.set("b", "c", 0.8, 0.0, 0.0);   // ent(X2,X3) = 0.8
  const RuleSet rs = parse_rules(kTableRules);
  const Rule& r5 = rs.rules[4];
  Substitution s{{"X1", make_sentence("a")}, {"X2", make_sentence("b")},
                 {"X3", make_sentence("c")}};
  CHECK(body_probability(stub, r5, s) == doctest::Approx(0.8));

  const Rule& r1 = rs.rules[0];
  Substitution self{{"X1", make_sentence("a")}};
  CHECK(body_probability(stub, r1, self) == 1.0);

  const Rule& r2 = rs.rules[1];
  StubScorer single;
  single.set("a", "b", 0.0, 0.42, 0.0);
  CHECK(body_probability(single, r2, bind2(make_sentence("a"), make_sentence("b"))) ==
        doctest::Approx(0.42));
}

TEST_CASE("head probability complements negated heads") {
  StubScorer stub;
  stub.set("b", "a", 0.0, 0.2, 0.8);
  const RuleSet rs = parse_rules(kTableRules);
  const Substitution s = bind2(make_sentence("a"), make_sentence("b"));

  CHECK(head_probability(stub, rs.rules[1], s) == doctest::Approx(0.2));  // con(X2,X1)
  CHECK(head_probability(stub, rs.rules[2], s) == doctest::Approx(0.8));  // ~con(X2,X1)

  StubScorer certain;
  certain.set("b", "a", 0.0, 1.0, 0.0);
  CHECK(head_probability(certain, rs.rules[2], s) == doctest::Approx(0.0));
}

TEST_CASE("inconsistency loss is the hinge of body minus head") {
  const RuleSet rs = parse_rules(kTableRules);
  const Sentence s1 = make_sentence("a");
  const Sentence s2 = make_sentence("b");

  SUBCASE("R2 with p(con|s1,s2)=0.9 and p(con|s2,s1)=0.2 gives 0.7") {
    StubScorer stub;
    stub.set("a", "b", 0.0, 0.9, 0.1);
    stub.set("b", "a", 0.0, 0.2, 0.8);
    CHECK(inconsistency_loss(stub, rs.rules[1], bind2(s1, s2)) == doctest::Approx(0.7));
  }

  SUBCASE("equal body and head probabilities give exactly zero") {
    StubScorer stub;
    stub.set("a", "b", 0.0, 0.5, 0.5);
    stub.set("b", "a", 0.0, 0.5, 0.5);
    CHECK(inconsistency_loss(stub, rs.rules[1], bind2(s1, s2)) == 0.0);
  }

  SUBCASE("R1 with p(ent|s,s)=0.1 gives 0.9") {
    StubScorer stub;
    stub.set("a", "a", 0.1, 0.4, 0.5);
    Substitution self{{"X1", s1}};
    CHECK(inconsistency_loss(stub, rs.rules[0], self) == doctest::Approx(0.9));
  }
}

TEST_CASE("atom_holds follows the argmax with the stated tie-break") {
  const Sentence a = make_sentence("a");
  const Sentence b = make_sentence("b");
  const Substitution s = bind2(a, b);

  StubScorer stub;
  stub.set("a", "b", 0.5, 0.3, 0.2);
  CHECK(atom_holds(stub, Atom{Predicate::ent, "X1", "X2"}, s));
  CHECK(!atom_holds(stub, Atom{Predicate::con, "X1", "X2"}, s));

  stub.set("a", "b", 0.3, 0.3, 0.4);
  CHECK(!atom_holds(stub, Atom{Predicate::con, "X1", "X2"}, s));
  CHECK(atom_holds(stub, Atom{Predicate::neu, "X1", "X2"}, s));

  stub.set("a", "b", 0.4, 0.4, 0.2);  // exact tie: lowest class index wins
  CHECK(atom_holds(stub, Atom{Predicate::ent, "X1", "X2"}, s));
  CHECK(!atom_holds(stub, Atom{Predicate::con, "X1", "X2"}, s));
}

TEST_CASE("property: inconsistency loss stays in [0,1] and vanishes iff head >= body") {
  const RuleSet rs = parse_rules(kTableRules);
  const Sentence s1 = make_sentence("a");
  const Sentence s2 = make_sentence("b");
  Rng rng(42);

  for (int trial = 0; trial < 1000; ++trial) {
    auto simplex = [&rng]() {
      double a = rng.real(), b = rng.real(), c = rng.real();
      const double z = a + b + c;
      return std::array<double, 3>{a / z, b / z, c / z};
    };
    StubScorer stub;
    const auto p12 = simplex();
    const auto p21 = simplex();
    const auto p11 = simplex();
    stub.set("a", "b", p12[0], p12[1], p12[2]);
    stub.set("b", "a", p21[0], p21[1], p21[2]);
    stub.set("a", "a", p11[0], p11[1], p11[2]);

    for (const Rule& rule : rs.rules) {
      if (rule.variables().size() > 2) continue;
      Substitution s = rule.variables().size() == 1 ? Substitution{{"X1", s1}} : bind2(s1, s2);
      const double body = body_probability(stub, rule, s);
      const double head = head_probability(stub, rule, s);
      const double loss = inconsistency_loss(stub, rule, s);
      CHECK(loss >= 0.0);
      CHECK(loss <= 1.0);
      if (head >= body) {
        CHECK(loss == 0.0);
      } else {
        CHECK(loss > 0.0);
        CHECK(loss == doctest::Approx(body - head));
      }
    }
  }
}

TEST_CASE("property: body probability is monotone in each atom probability") {
  const RuleSet rs = parse_rules(kTableRules);
  const Rule& r5 = rs.rules[4];
  Rng rng(7);
  Substitution s{{"X1", make_sentence("a")}, {"X2", make_sentence("b")},
                 {"X3", make_sentence("c")}};

  for (int trial = 0; trial < 200; ++trial) {
    const double p1 = rng.real();
    const double p2 = rng.real();
    StubScorer stub;
    stub.set("a", "b", p1, 1.0 - p1, 0.0);
    stub.set("b", "c", p2, 1.0 - p2, 0.0);
    const double before = body_probability(stub, r5, s);

    // Decrease one atom probability; the min cannot increase.
    const double shrink = p1 * rng.real();
    StubScorer lowered;
    lowered.set("a", "b", shrink, 1.0 - shrink, 0.0);
    lowered.set("b", "c", p2, 1.0 - p2, 0.0);
    CHECK(body_probability(lowered, r5, s) <= before + 1e-12);
  }
}

TEST_CASE("R2 swap property: losses are the two hinges of the same difference") {
  Rng rng(99);
  const RuleSet rs = parse_rules(kTableRules);
  const Rule& r2 = rs.rules[1];
  const Sentence s1 = make_sentence("a");
  const Sentence s2 = make_sentence("b");

  for (int trial = 0; trial < 200; ++trial) {
    const double p12 = rng.real();
    const double p21 = rng.real();
    StubScorer stub;
    stub.set("a", "b", 0.0, p12, 1.0 - p12);
    stub.set("b", "a", 0.0, p21, 1.0 - p21);

    const double forward = inconsistency_loss(stub, r2, bind2(s1, s2));
    const double backward = inconsistency_loss(stub, r2, bind2(s2, s1));
    CHECK(forward == doctest::Approx(std::max(0.0, p12 - p21)));
    CHECK(backward == doctest::Approx(std::max(0.0, p21 - p12)));
    CHECK((forward == 0.0 || backward == 0.0));
  }
}
