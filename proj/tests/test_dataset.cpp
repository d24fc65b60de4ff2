#include <doctest.h>

#include <sstream>

#include "matchvar/dataset.hpp"
#include "matchvar/error.hpp"

using namespace matchvar;

TEST_CASE("CSV parsing") {
  std::istringstream in("Y,W,X_1,X_2\n1.5,1,0.1,0.2\n-2,0,3e-1,4\n\n");
  const Dataset d = parse_csv(in);
  CHECK(d.n() == 2);
  CHECK(d.d() == 2);
  CHECK(d.n1() == 1);
  CHECK(d.n0() == 1);
  CHECK(d.treated_fraction() == 0.5);
  CHECK(d.x[1][0] == 0.3);
  std::ostringstream out;
  write_csv(d, out);
  std::istringstream again(out.str());
  const Dataset back = parse_csv(again);
  CHECK(back.y == d.y);
  CHECK(back.w == d.w);
  CHECK(back.x.coords().size() == d.x.coords().size());
}

TEST_CASE("malformed CSV reports the line") {
  const char* bad[] = {
      "",                           // no header
      "Y,W,X1\n1,0,2\n",            // header spelling
      "Y,W,X_1\n1,2,0\n",           // W not binary
      "Y,W,X_1\n1,0\n",             // short row
      "Y,W,X_1\n1,0,abc\n",         // not a number
      "Y,W,X_1\n1,0,nan\n",         // not finite
      "Y,W,X_1\n1,0,1,2\n",         // long row
      "Y,W,X_2\n1,0,1\n",           // wrong index
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    try {
      parse_csv(in);
      FAIL("accepted: " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
    }
  }
  std::istringstream in("Y,W,X_1\n1,0,2\n3,1,oops\n");
  try {
    parse_csv(in);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
