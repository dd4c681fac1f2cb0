#include "doctest.h"

#include "sobolev/verify.hpp"

using namespace sobo;

TEST_CASE("report text and verdict") {
  VerifyReport r;
  r.suite = "demo";
  r.headline = "demo: x=1";
  r.add("first", true, "fine");
  CHECK(r.passed());
  CHECK(r.to_text() == "demo: x=1\n  [ok] first: fine\ndemo: PASS\n");
  r.add("second", false, "broken");
  CHECK_FALSE(r.passed());
  CHECK(r.to_text() == "demo: x=1\n  [ok] first: fine\n  [FAIL] second: broken\ndemo: FAIL\n");
}

TEST_CASE("prop1 suite passes at s = 0 and s = 1.5") {
  for (double s : {0.0, 1.5}) {
    CAPTURE(s);
    Prop1Options o;
    o.s = s;
    o.energies = 5;
    const VerifyReport r = verify_prop1(o);
    CHECK(r.passed());
    CHECK(r.checks.size() == 4);
    CHECK(r.headline.rfind("prop1: cosine=0.999", 0) == 0);
  }
}

TEST_CASE("prop1 is deterministic and rejects bad options") {
  Prop1Options o;
  o.energies = 3;
  CHECK(verify_prop1(o).to_text() == verify_prop1(o).to_text());
  o.energies = 0;
  CHECK_THROWS_AS(verify_prop1(o), ValidationError);
  o.energies = 3;
  o.eps = 0.0;
  CHECK_THROWS_AS(verify_prop1(o), ValidationError);
}

TEST_CASE("prop2 suite on a reduced sweep") {
  Prop2Options o;
  o.widths = {2, 8};
  const VerifyReport r = verify_prop2(o);
  CHECK(r.checks.size() == 4);
  CHECK(r.passed());

  o.widths = {2};
  const VerifyReport missing = verify_prop2(o);
  CHECK_FALSE(missing.passed());
  o.widths.clear();
  CHECK_THROWS_AS(verify_prop2(o), ValidationError);
}

TEST_CASE("spectral suites with few samples") {
  SpectralOptions o;
  o.fields_per_shape = 5;
  CHECK(verify_spectral_identities(o).passed());
  o.coloring_samples = 20000;
  o.coloring_tolerance = 0.1;
  o.white_samples = 2000;
  const VerifyReport c = verify_coloring(o);
  CHECK(c.passed());
  CHECK(c.checks.size() == 4);
}
