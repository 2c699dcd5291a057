// Writes the synthetic fixture universe used by the tests and examples.
//   make_fixtures <dir> [--separable] [--companies N] [--seed S]

#include <iostream>

#include <CLI11.hpp>

#include "fundacast/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic fundacast universe"};
  std::string dir;
  fundacast::synthetic::Options opt;
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--companies", opt.companies);
  app.add_option("--seed", opt.seed);
  app.add_flag("--separable", opt.separable_signal, "plant a linearly separable ASPD signal");
  CLI11_PARSE(app, argc, argv);

  const auto u = fundacast::synthetic::generate(opt);
  fundacast::synthetic::write_universe(u, dir);
  std::cout << u.companies.size() << " companies -> " << dir << "\n";
  return 0;
}
