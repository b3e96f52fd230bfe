#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <unistd.h>

namespace testutil {

// Unique temp file, removed on destruction.
struct TempFile {
  std::string path;
  explicit TempFile(const std::string& content = "") {
    char tmpl[] = "/tmp/vmask_test_XXXXXX";
    const int fd = mkstemp(tmpl);
    if (fd >= 0) close(fd);
    path = tmpl;
    if (!content.empty()) {
      std::ofstream out(path);
      out << content;
    }
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace testutil
