#include "kginstruct/subprocess.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <mutex>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace kgi {
namespace {

// A child that exits before draining stdin must not SIGPIPE the parent.
void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
    int fds[2] = {-1, -1};
    // O_CLOEXEC keeps these descriptors out of children forked concurrently by
    // other threads; without it a sibling child can hold this pipe's write end
    // open forever and the reader never sees EOF. dup2 onto the standard
    // descriptors clears the flag for the ends the child actually uses.
    Pipe() {
        if (::pipe2(fds, O_CLOEXEC) != 0) fds[0] = fds[1] = -1;
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    bool ok() const { return fds[0] >= 0; }
    void close_read() {
        if (fds[0] >= 0) ::close(fds[0]);
        fds[0] = -1;
    }
    void close_write() {
        if (fds[1] >= 0) ::close(fds[1]);
        fds[1] = -1;
    }
};

void set_nonblocking(int fd) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view stdin_data,
                          int timeout_ms, const std::filesystem::path& cwd) {
    ignore_sigpipe();

    ProcessResult result;
    if (argv.empty()) {
        result.exit_code = 127;
        result.err = "empty argv";
        return result;
    }

    Pipe to_child, from_child, err_child;
    if (!to_child.ok() || !from_child.ok() || !err_child.ok()) {
        result.exit_code = 127;
        result.err = "pipe() failed";
        return result;
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        result.exit_code = 127;
        result.err = "fork() failed";
        return result;
    }

    if (pid == 0) {
        // Child: wire the pipes to the standard descriptors and exec.
        ::dup2(to_child.fds[0], STDIN_FILENO);
        ::dup2(from_child.fds[1], STDOUT_FILENO);
        ::dup2(err_child.fds[1], STDERR_FILENO);
        to_child.close_read();
        to_child.close_write();
        from_child.close_read();
        from_child.close_write();
        err_child.close_read();
        err_child.close_write();

        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            std::string msg = "chdir failed: " + cwd.string() + "\n";
            [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
            ::_exit(127);
        }
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        std::string msg = std::string("exec failed: ") + argv[0] + ": " + std::strerror(errno) + "\n";
        [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
        ::_exit(127);
    }

    // Parent.
    to_child.close_read();
    from_child.close_write();
    err_child.close_write();
    set_nonblocking(to_child.fds[1]);
    set_nonblocking(from_child.fds[0]);
    set_nonblocking(err_child.fds[0]);

    size_t written = 0;
    if (stdin_data.empty()) to_child.close_write();

    const int64_t deadline = timeout_ms > 0 ? now_ms() + timeout_ms : -1;
    bool killed = false;
    char buf[1 << 16];

    while (from_child.fds[0] >= 0 || err_child.fds[0] >= 0 || to_child.fds[1] >= 0) {
        struct pollfd pfds[3];
        int n = 0;
        int idx_out = -1, idx_err = -1, idx_in = -1;
        if (from_child.fds[0] >= 0) {
            idx_out = n;
            pfds[n++] = {from_child.fds[0], POLLIN, 0};
        }
        if (err_child.fds[0] >= 0) {
            idx_err = n;
            pfds[n++] = {err_child.fds[0], POLLIN, 0};
        }
        if (to_child.fds[1] >= 0) {
            idx_in = n;
            pfds[n++] = {to_child.fds[1], POLLOUT, 0};
        }

        int wait_ms = 200;
        if (deadline >= 0) {
            int64_t remain = deadline - now_ms();
            if (remain <= 0) {
                if (!killed) {
                    ::kill(pid, SIGKILL);
                    killed = true;
                    result.timed_out = true;
                }
                // After the kill, drain whatever the child managed to emit.
                wait_ms = 50;
            } else {
                wait_ms = static_cast<int>(remain < 200 ? remain : 200);
            }
        }

        int rc = ::poll(pfds, static_cast<nfds_t>(n), wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }

        auto drain = [&](Pipe& p, std::string& sink) {
            ssize_t got = ::read(p.fds[0], buf, sizeof buf);
            if (got > 0)
                sink.append(buf, static_cast<size_t>(got));
            else if (got == 0 || (got < 0 && errno != EAGAIN && errno != EINTR))
                p.close_read();
        };
        if (idx_out >= 0 && (pfds[idx_out].revents & (POLLIN | POLLHUP | POLLERR)))
            drain(from_child, result.out);
        if (idx_err >= 0 && (pfds[idx_err].revents & (POLLIN | POLLHUP | POLLERR)))
            drain(err_child, result.err);
        if (idx_in >= 0 && (pfds[idx_in].revents & (POLLOUT | POLLHUP | POLLERR))) {
            if (pfds[idx_in].revents & (POLLHUP | POLLERR)) {
                to_child.close_write();  // reader gone; stop feeding
            } else {
                ssize_t put = ::write(to_child.fds[1], stdin_data.data() + written,
                                      stdin_data.size() - written);
                if (put > 0) written += static_cast<size_t>(put);
                if ((put < 0 && errno != EAGAIN && errno != EINTR) || written == stdin_data.size())
                    to_child.close_write();
            }
        }
        if (killed && rc == 0 && from_child.fds[0] < 0 && err_child.fds[0] < 0) break;
        if (killed) to_child.close_write();
    }

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

}  // namespace kgi
