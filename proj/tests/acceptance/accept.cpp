// Acceptance suite runner: one subcommand per criterion, printing a PASS/FAIL
// line per check.  Exit status is the number of failed checks.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "sjrp/parallel.hpp"
#include "sjrp/simd.hpp"

namespace accept {
int run_c1(const std::string& workdir);
int run_c2(const std::string& workdir);
int run_c3(const std::string& workdir);
int run_c4(const std::string& workdir);
int run_c5(const std::string& workdir);
int run_c6(const std::string& workdir);
int run_c7(const std::string& workdir);
}  // namespace accept

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr,
                 "usage: accept <c1|c2|c3|c4|c5|c6|c7|fast> [--work DIR] [--threads N]\n"
                 "  fast runs criteria 1, 3, 5 and 6; criteria 2, 4 and 7 train\n"
                 "  networks and belong to the slow suite.\n");
    return 64;
  }
  std::string cmd = argv[1];
  std::string workdir = "accept_work";
  for (int i = 2; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--work") == 0) workdir = argv[i + 1];
    if (std::strcmp(argv[i], "--threads") == 0)
      sjrp::parallel::set_threads(std::atoi(argv[i + 1]));
  }
  std::filesystem::create_directories(workdir);
  std::printf("# acceptance %s (isa=%s, threads=%d)\n", cmd.c_str(),
              sjrp::simd::isa_name(sjrp::simd::active_isa()), sjrp::parallel::threads());

  int fails = 0;
  try {
    if (cmd == "c1")
      fails = accept::run_c1(workdir);
    else if (cmd == "c2")
      fails = accept::run_c2(workdir);
    else if (cmd == "c3")
      fails = accept::run_c3(workdir);
    else if (cmd == "c4")
      fails = accept::run_c4(workdir);
    else if (cmd == "c5")
      fails = accept::run_c5(workdir);
    else if (cmd == "c6")
      fails = accept::run_c6(workdir);
    else if (cmd == "c7")
      fails = accept::run_c7(workdir);
    else if (cmd == "fast")
      fails = accept::run_c1(workdir) + accept::run_c3(workdir) +
              accept::run_c5(workdir) + accept::run_c6(workdir);
    else {
      std::fprintf(stderr, "unknown criterion '%s'\n", cmd.c_str());
      return 64;
    }
  } catch (const std::exception& e) {
    std::printf("[%s] FAIL: unhandled error: %s\n", cmd.c_str(), e.what());
    return 70;
  }
  std::printf("# acceptance %s: %d failed check(s)\n", cmd.c_str(), fails);
  return fails > 125 ? 125 : fails;
}
