#pragma once

// External simulator adapter. One child process per evaluation:
//   stdin  <- {"id": "...", "b": [..]}\n
//   stdout -> {"w": <number>}
// Exit status 0 is required.

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Core>
#include <json.hpp>

#include "gpbounds/errors.hpp"

namespace gpbounds {

struct ChildResult {
  int exit_status = -1;  // -1 when killed by a signal
  bool timed_out = false;
  std::string out;
  std::string err;
};

namespace detail {

inline std::string excerpt(const std::string& s, std::size_t limit = 400) {
  return s.size() <= limit ? s : s.substr(0, limit) + "...";
}

inline void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace detail

/// Runs `/bin/sh -c command`, feeding `input` on stdin.
inline ChildResult run_child(const std::string& command, const std::string& input,
                             std::chrono::milliseconds timeout) {
  // Writes to a child that already exited must fail with EPIPE, not kill us.
  static const bool sigpipe_ignored = (std::signal(SIGPIPE, SIG_IGN), true);
  (void)sigpipe_ignored;
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe(in_pipe) != 0) throw EvaluationError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw EvaluationError("pipe() failed");
  }
  if (::pipe(err_pipe) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw EvaluationError("pipe() failed");
  }

  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]})
      ::close(fd);
    throw EvaluationError("fork() failed");
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]})
      ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }

  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  int fd_in = in_pipe[1], fd_out = out_pipe[0], fd_err = err_pipe[0];
  ::fcntl(fd_in, F_SETFL, O_NONBLOCK);

  ChildResult res;
  std::size_t written = 0;
  if (input.empty()) detail::close_fd(fd_in);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];

  while (fd_out >= 0 || fd_err >= 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      res.timed_out = true;
      break;
    }
    std::vector<pollfd> fds;
    if (fd_in >= 0) fds.push_back({fd_in, POLLOUT, 0});
    if (fd_out >= 0) fds.push_back({fd_out, POLLIN, 0});
    if (fd_err >= 0) fds.push_back({fd_err, POLLIN, 0});
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (const auto& p : fds) {
      if (!p.revents) continue;
      if (p.fd == fd_in) {
        const ssize_t n = ::write(fd_in, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) detail::close_fd(fd_in);
        if (written == input.size()) detail::close_fd(fd_in);
      } else {
        const ssize_t n = ::read(p.fd, buf, sizeof buf);
        if (n > 0) {
          (p.fd == fd_out ? res.out : res.err).append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EAGAIN) {
          if (p.fd == fd_out)
            detail::close_fd(fd_out);
          else
            detail::close_fd(fd_err);
        }
      }
    }
  }
  detail::close_fd(fd_in);
  detail::close_fd(fd_out);
  detail::close_fd(fd_err);

  if (res.timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  res.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

/// Builds the one-line JSON request for a point.
inline std::string make_request(const std::string& id, const Eigen::VectorXd& b) {
  nlohmann::json j;
  j["id"] = id;
  j["b"] = std::vector<double>(b.data(), b.data() + b.size());
  return j.dump() + "\n";
}

/// Parses {"w": number} from child stdout.
inline double parse_response(const std::string& out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(out);
  } catch (const nlohmann::json::exception&) {
    throw EvaluationError("malformed child output: " + detail::excerpt(out));
  }
  if (!j.is_object() || !j.contains("w"))
    throw EvaluationError("child output lacks field \"w\": " + detail::excerpt(out));
  const auto& w = j["w"];
  if (w.is_number()) {
    const double v = w.get<double>();
    if (!std::isfinite(v)) throw EvaluationError("child returned a non-finite value");
    return v;
  }
  // A bare NaN token is not JSON and fails to parse above.
  throw EvaluationError("child returned a non-numeric \"w\": " + detail::excerpt(out));
}

class SubprocessBlackBox {
 public:
  SubprocessBlackBox(std::string command, std::chrono::milliseconds timeout,
                     std::string run_id = "run")
      : command_(std::move(command)), timeout_(timeout), run_id_(std::move(run_id)) {
    if (command_.empty()) throw InvalidArgument("subprocess: empty command");
  }

  double operator()(const Eigen::VectorXd& b) const {
    const std::string id = run_id_ + ":" + std::to_string(counter_->fetch_add(1));
    const auto res = run_child(command_, make_request(id, b), timeout_);
    if (res.timed_out)
      throw EvaluationError("child timed out after " + std::to_string(timeout_.count()) +
                            " ms; stderr: " + detail::excerpt(res.err));
    if (res.exit_status != 0)
      throw EvaluationError("child exited with status " + std::to_string(res.exit_status) +
                            "; stderr: " + detail::excerpt(res.err) +
                            "; stdout: " + detail::excerpt(res.out));
    return parse_response(res.out);
  }

  long launches() const { return counter_->load(); }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::string run_id_;
  std::shared_ptr<std::atomic<long>> counter_ = std::make_shared<std::atomic<long>>(0);
};

}  // namespace gpbounds
