#include <atomic>
#include <thread>
#include <vector>

#include "doctest.h"
#include "rofbs/registry.hpp"
#include "support.hpp"

using namespace rofbs;
using testsupport::TempDir;

namespace {

BackupRecord make_record(const std::string& original) {
  BackupRecord rec;
  rec.original_path = original;
  rec.backup_path = original + ".tmp";
  rec.content_hash = "deadbeef";
  rec.size = 42;
  rec.created_at = 1;
  return rec;
}

}  // namespace

TEST_CASE("reserve is claim-once") {
  BackupRegistry reg;
  CHECK(reg.reserve("/a"));
  CHECK(!reg.reserve("/a"));
  reg.commit(make_record("/a"));
  CHECK(!reg.reserve("/a"));
  CHECK(reg.contains("/a"));
  CHECK(reg.size() == 1);
}

TEST_CASE("abort releases a reservation and counts a drop") {
  BackupRegistry reg;
  CHECK(reg.reserve("/a"));
  reg.abort("/a");
  CHECK(reg.drop_count() == 1);
  CHECK(reg.reserve("/a"));  // claimable again after the failed copy
}

TEST_CASE("mark transitions status") {
  BackupRegistry reg;
  reg.reserve("/a");
  reg.commit(make_record("/a"));
  CHECK(reg.mark("/a", BackupStatus::restored));
  CHECK(reg.find("/a")->status == BackupStatus::restored);
  CHECK(!reg.mark("/missing", BackupStatus::restored));
}

TEST_CASE("concurrent reserve admits exactly one winner per path") {
  BackupRegistry reg;
  constexpr int kThreads = 8;
  constexpr int kPaths = 200;
  std::atomic<int> wins{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&reg, &wins] {
      for (int p = 0; p < kPaths; ++p) {
        const std::string path = "/f" + std::to_string(p);
        if (reg.reserve(path)) {
          reg.commit(make_record(path));
          wins.fetch_add(1);
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(wins.load() == kPaths);
  CHECK(reg.size() == kPaths);
}

TEST_CASE("journal replay restores registry state") {
  TempDir tmp;
  const std::string journal = tmp.sub("journal.jsonl");
  {
    BackupRegistry reg;
    reg.open_journal(journal);
    reg.reserve("/x");
    reg.commit(make_record("/x"));
    reg.reserve("/y");
    reg.commit(make_record("/y"));
    reg.mark("/y", BackupStatus::restored);
  }
  BackupRegistry replayed;
  replayed.open_journal(journal);
  CHECK(replayed.size() == 2);
  CHECK(replayed.find("/x")->status == BackupStatus::created);
  CHECK(replayed.find("/y")->status == BackupStatus::restored);
  // A replayed path stays claimed.
  CHECK(!replayed.reserve("/x"));
}

TEST_CASE("snapshot is sorted by original path") {
  BackupRegistry reg;
  for (const auto* p : {"/c", "/a", "/b"}) {
    reg.reserve(p);
    reg.commit(make_record(p));
  }
  const auto snap = reg.snapshot();
  REQUIRE(snap.size() == 3);
  CHECK(snap[0].original_path == "/a");
  CHECK(snap[2].original_path == "/c");
}
