#include "cyclesql/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "cyclesql/error.hpp"

extern char** environ;

namespace cyclesql {

namespace {

std::string errno_text() { return std::strerror(errno); }

} // namespace

ChildProcess::ChildProcess(const std::string& command) {
   std::signal(SIGPIPE, SIG_IGN);
   int to_child[2];
   int from_child[2];
   if (pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorKind::Adapter, "pipe: " + errno_text());
   if (pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(ErrorKind::Adapter, "pipe: " + errno_text());
   }
   posix_spawn_file_actions_t actions;
   posix_spawn_file_actions_init(&actions);
   posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
   posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
   posix_spawnattr_t attr;
   posix_spawnattr_init(&attr);
   posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
   posix_spawnattr_setpgroup(&attr, 0);

   const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
   const int rc = posix_spawn(&pid_, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
   posix_spawn_file_actions_destroy(&actions);
   posix_spawnattr_destroy(&attr);
   ::close(to_child[0]);
   ::close(from_child[1]);
   if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw Error(ErrorKind::Adapter, "cannot start '" + command + "': " + std::strerror(rc));
   }
   in_fd_ = to_child[1];
   out_fd_ = from_child[0];
}

ChildProcess::~ChildProcess() {
   try {
      terminate(std::chrono::milliseconds(200));
   } catch (...) {
   }
   if (out_fd_ >= 0) ::close(out_fd_);
}

void ChildProcess::write(std::string_view bytes) {
   if (in_fd_ < 0) throw Error(ErrorKind::Adapter, "adapter stdin is closed");
   while (!bytes.empty()) {
      const ssize_t n = ::write(in_fd_, bytes.data(), bytes.size());
      if (n < 0) {
         if (errno == EINTR) continue;
         throw Error(ErrorKind::Adapter, "write to adapter failed: " + errno_text());
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
   }
}

std::optional<std::string> ChildProcess::read_line(std::optional<std::chrono::milliseconds> timeout) {
   const auto deadline = std::chrono::steady_clock::now() + timeout.value_or(std::chrono::milliseconds(0));
   for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
         std::string line = buffer_.substr(0, nl);
         buffer_.erase(0, nl + 1);
         if (!line.empty() && line.back() == '\r') line.pop_back();
         return line;
      }
      if (out_fd_ < 0) return std::nullopt;
      if (timeout) {
         const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
         if (left.count() <= 0) throw Error(ErrorKind::Timeout, "adapter did not answer in time");
         pollfd p{out_fd_, POLLIN, 0};
         const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
         if (rc < 0 && errno != EINTR) throw Error(ErrorKind::Adapter, "poll: " + errno_text());
         if (rc <= 0) continue;
      }
      char chunk[4096];
      const ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
         if (errno == EINTR) continue;
         throw Error(ErrorKind::Adapter, "read from adapter failed: " + errno_text());
      }
      if (n == 0) {
         if (buffer_.empty()) return std::nullopt;
         std::string line = std::move(buffer_);
         buffer_.clear();
         return line;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
   }
}

void ChildProcess::close_stdin() {
   if (in_fd_ >= 0) {
      ::close(in_fd_);
      in_fd_ = -1;
   }
}

bool ChildProcess::running() {
   if (reaped_ || pid_ <= 0) return false;
   int status = 0;
   if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      reaped_ = true;
      return false;
   }
   return true;
}

void ChildProcess::terminate(std::chrono::milliseconds grace) {
   close_stdin();
   if (pid_ <= 0 || reaped_) return;
   const auto deadline = std::chrono::steady_clock::now() + grace;
   while (running() && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(5));
   if (!reaped_) {
      ::kill(-pid_, SIGKILL);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      reaped_ = true;
   }
}

} // namespace cyclesql
