#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dafny_pilot/process.hpp"
#include "dafny_pilot/util.hpp"

namespace test {

inline std::filesystem::path data_dir() { return TEST_DATA_DIR; }
inline std::filesystem::path corpus_dir() { return CORPUS_DIR; }
inline std::filesystem::path case_dir(const std::string& id) { return corpus_dir() / "cases" / id; }

inline std::string read(const std::filesystem::path& p) { return dafny_pilot::read_file(p); }

inline void write(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    dafny_pilot::write_file_atomic(p, content);
}

/// Seeded generator for the property tests.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    size_t below(size_t n) {
        if (n == 0) return 0;
        return std::uniform_int_distribution<size_t>(0, n - 1)(gen_);
    }

private:
    std::mt19937_64 gen_;
};

/// Stands in for the dafny executable. "assert false" lines fail, a line
/// containing "parse error here" is a syntax error, and SLEEP hangs.
inline const char* kFakeDafny = R"(#!/bin/sh
if [ "$1" = "--version" ]; then echo "4.3.0.0"; exit 0; fi
mode="$1"
for last; do :; done
if grep -q SLEEP "$last"; then sleep 5; fi
if grep -q "parse error here" "$last"; then
  line=$(grep -n "parse error here" "$last" | head -1 | cut -d: -f1)
  echo "$last($line,3): Error: invalid UpdateStmt"
  echo "1 parse errors detected in $last"
  exit 2
fi
if [ "$mode" = "resolve" ]; then
  echo ""
  echo "Dafny program verifier did not attempt verification"
  exit 0
fi
n=0
for line in $(grep -n "assert false" "$last" | cut -d: -f1); do
  echo "$last($line,3): Error: assertion might not hold"
  n=$((n+1))
done
if [ $n -gt 0 ]; then
  echo ""
  if [ $n -eq 1 ]; then echo "Dafny program verifier finished with 0 verified, 1 error"
  else echo "Dafny program verifier finished with 0 verified, $n errors"; fi
  exit 4
fi
echo ""
echo "Dafny program verifier finished with 1 verified, 0 errors"
)";

inline std::filesystem::path install_fake_dafny(const std::filesystem::path& dir) {
    const std::filesystem::path p = dir / "dafny";
    write(p, kFakeDafny);
    std::filesystem::permissions(p, std::filesystem::perms::owner_all);
    return p;
}

}  // namespace test
