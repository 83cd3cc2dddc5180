#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/scoring.hpp"

namespace lossprobe::scoring {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    ::sigaction(SIGPIPE, &sa, nullptr);
  });
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

std::string join_command(const std::string& command, const std::vector<std::string>& args) {
  std::string out = command;
  for (const auto& a : args) {
    out += ' ';
    out += a;
  }
  return out;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

nlohmann::json parse_response_line(const std::string& line) {
  std::string cleaned;
  cleaned.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      cleaned += c;
      if (c == '\\' && i + 1 < line.size()) {
        cleaned += line[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      cleaned += c;
      continue;
    }
    const bool boundary = i == 0 || !is_ident_char(line[i - 1]);
    const auto literal_at = [&](std::string_view lit) {
      return boundary && line.compare(i, lit.size(), lit) == 0 &&
             (i + lit.size() == line.size() || !is_ident_char(line[i + lit.size()]));
    };
    if (literal_at("-Infinity")) {
      cleaned += "null";
      i += 8;
    } else if (literal_at("Infinity")) {
      cleaned += "null";
      i += 7;
    } else if (literal_at("NaN")) {
      cleaned += "null";
      i += 2;
    } else {
      cleaned += c;
    }
  }
  try {
    return nlohmann::json::parse(cleaned);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolViolation(fmt::format("adapter sent a non-JSON line: {}", line.substr(0, 200)));
  }
}

ExternalScorer::ExternalScorer(const std::string& command, const std::vector<std::string>& args,
                               ExternalOptions options)
    : descriptor_(join_command(command, args)), options_(options) {
  ignore_sigpipe();

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) fail(Errc::spawn_failure, "pipe() failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    fail(Errc::spawn_failure, "pipe() failed");
  }
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    fail(Errc::spawn_failure, "pipe() failed");
  }

  std::vector<std::string> argv_store;
  argv_store.push_back(command);
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
      ::close(fd);
    }
    fail(Errc::spawn_failure, fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(err_pipe[1], &err, sizeof err);
    ::_exit(127);
  }

  pid_ = pid;
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  int exec_errno = 0;
  const auto n = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
  ::close(err_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof exec_errno)) {
    reap(std::chrono::milliseconds(1000));
    close_fd(to_child_);
    close_fd(from_child_);
    fail(Errc::spawn_failure,
         fmt::format("cannot execute '{}': {}", command, std::strerror(exec_errno)));
  }

  try {
    send_line(R"({"cmd":"hello"})");
    const auto line = read_line(options_.handshake_timeout, Errc::handshake_timeout);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      fail(Errc::malformed_handshake, fmt::format("handshake reply is not JSON: {}", line));
    }
    if (!reply.is_object() || reply.value("ok", false) != true) {
      fail(Errc::malformed_handshake, fmt::format("handshake refused: {}", line));
    }
    if (!reply.contains("name") || !reply["name"].is_string()) {
      fail(Errc::malformed_handshake, "handshake missing string field 'name'");
    }
    if (!reply.contains("vocab_size") || !reply["vocab_size"].is_number_integer() ||
        reply["vocab_size"].get<std::int64_t>() <= 0) {
      fail(Errc::malformed_handshake, "handshake missing positive integer 'vocab_size'");
    }
    if (reply.contains("loss_base") && reply["loss_base"] != "nats") {
      fail(Errc::malformed_handshake,
           fmt::format("unsupported loss_base {}", reply["loss_base"].dump()));
    }
    name_ = reply["name"].get<std::string>();
    vocab_size_ = reply["vocab_size"].get<std::uint32_t>();
    handshake_ = std::move(reply);
  } catch (...) {
    kill_child();
    throw;
  }
}

ExternalScorer::~ExternalScorer() {
  try {
    shutdown();
  } catch (...) {
    kill_child();
  }
}

int ExternalScorer::shutdown() {
  if (pid_ < 0) return -1;
  try {
    send_line(R"({"cmd":"shutdown"})");
    read_line(std::chrono::milliseconds(2000), Errc::backend_failure);
  } catch (const Error&) {
    // Fall through to reaping; a dead or wedged adapter is killed below.
  }
  close_fd(to_child_);
  const int status = reap(std::chrono::milliseconds(2000));
  close_fd(from_child_);
  return status;
}

void ExternalScorer::kill_child() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
  close_fd(to_child_);
  close_fd(from_child_);
}

int ExternalScorer::reap(std::chrono::milliseconds grace) {
  if (pid_ < 0) return -1;
  const auto deadline = Clock::now() + grace;
  int status = 0;
  while (true) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) break;
    if (r < 0) {
      pid_ = -1;
      return -1;
    }
    if (Clock::now() >= deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  pid_ = -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void ExternalScorer::send_line(const std::string& line) {
  if (to_child_ < 0) fail(Errc::backend_failure, "adapter session is closed");
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::backend_failure, fmt::format("write to adapter failed: {}", std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ExternalScorer::read_line(std::chrono::milliseconds timeout, Errc timeout_code) {
  const bool bounded = timeout.count() > 0;
  const auto deadline = Clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (from_child_ < 0) fail(Errc::backend_failure, "adapter session is closed");
    int wait_ms = -1;
    if (bounded) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) {
        fail(timeout_code, fmt::format("adapter did not reply within {} ms", timeout.count()));
      }
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, wait_ms);
    if (r < 0) {
      if (errno == EINTR) continue;
      fail(Errc::backend_failure, fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (r == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::backend_failure, fmt::format("read from adapter failed: {}", std::strerror(errno)));
    }
    if (n == 0) fail(Errc::backend_failure, "adapter closed its output (process exited?)");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json ExternalScorer::request(const nlohmann::json& message,
                                       std::chrono::milliseconds timeout) {
  send_line(message.dump());
  std::string line;
  try {
    line = read_line(timeout, Errc::backend_failure);
  } catch (const Error&) {
    // A late reply would desynchronize every later request.
    kill_child();
    throw;
  }
  const auto reply = parse_response_line(line);
  if (!reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean()) {
    throw ProtocolViolation(fmt::format("response lacks boolean 'ok': {}", reply.dump()));
  }
  if (!reply["ok"].get<bool>()) {
    const auto msg = reply.contains("error") && reply["error"].is_string()
                         ? reply["error"].get<std::string>()
                         : std::string("unspecified adapter error");
    fail(Errc::backend_failure, fmt::format("adapter error: {}", msg));
  }
  return reply;
}

std::vector<double> ExternalScorer::score_tokens(std::span<const TokenId> tokens) {
  const std::string id = fmt::format("s{}", next_id_++);
  nlohmann::json message;
  message["cmd"] = "score";
  message["id"] = id;
  message["tokens"] = std::vector<TokenId>(tokens.begin(), tokens.end());
  const auto reply = request(message, options_.request_timeout);

  if (!reply.contains("id") || reply["id"] != id) {
    throw ProtocolViolation(fmt::format("response id {} does not match request id {}",
                                        reply.value("id", nlohmann::json()).dump(), id));
  }
  if (!reply.contains("nll") || !reply["nll"].is_array()) {
    throw ProtocolViolation("response lacks array 'nll'");
  }
  const auto& nll = reply["nll"];
  if (nll.size() != tokens.size()) {
    throw ProtocolViolation(
        fmt::format("adapter returned {} NLLs for {} tokens", nll.size(), tokens.size()));
  }
  std::vector<double> out(nll.size());
  for (std::size_t i = 0; i < nll.size(); ++i) {
    if (!nll[i].is_number()) {
      throw ProtocolViolation(fmt::format("non-finite NLL at token {}", i), i);
    }
    out[i] = nll[i].get<double>();
    if (!std::isfinite(out[i])) {
      throw ProtocolViolation(fmt::format("non-finite NLL at token {}", i), i);
    }
  }
  return out;
}

}  // namespace lossprobe::scoring
