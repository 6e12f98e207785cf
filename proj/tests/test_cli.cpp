#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "test_support.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(AGRICLIP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = agriclip::testkit::scratch_dir("cli");
  const std::string small = " --set output_dir=" + dir.string() +
                            " --set corpus.images_per_class=5 --set corpus.heldout_images_per_class=2"
                            " --set corpus.image_size=32";
  EXPECT_EQ(run("gen-corpus" + small), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "default" / "corpus" / "manifest.jsonl"));
  EXPECT_EQ(run("gen-corpus --no-such-flag"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("gen-corpus" + small + " --set distill.teacher_temperature=0.5"), 1);
  EXPECT_EQ(run("gen-corpus --set bogus.key=1"), 1);
  EXPECT_EQ(run("gen-corpus --config " + (dir / "missing.cfg").string()), 1);
  EXPECT_EQ(run("fit-align" + small + " --set run_id=never_trained"), 1);
  EXPECT_EQ(run("gradcheck --seeds 1"), 0);
}

}  // namespace
