#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>

namespace cyclesql {

/// Child process started through /bin/sh -c with pipes on stdin and stdout;
/// stderr is inherited. The child leads its own process group.
class ChildProcess {
   public:
   explicit ChildProcess(const std::string& command);
   ~ChildProcess();
   ChildProcess(const ChildProcess&) = delete;
   ChildProcess& operator=(const ChildProcess&) = delete;

   /// Writes all bytes to the child's stdin. Errors: Adapter on a closed pipe.
   void write(std::string_view bytes);
   /// Next line from stdout without the newline; nullopt at end of stream.
   /// With a timeout, throws ErrorKind::Timeout when nothing arrives in time.
   std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
   void close_stdin();
   /// Closes stdin, waits up to `grace`, then kills the process group.
   void terminate(std::chrono::milliseconds grace = std::chrono::milliseconds(1000));
   bool running();
   pid_t pid() const { return pid_; }

   private:
   pid_t pid_ = -1;
   int in_fd_ = -1;
   int out_fd_ = -1;
   bool reaped_ = false;
   std::string buffer_;
};

} // namespace cyclesql
