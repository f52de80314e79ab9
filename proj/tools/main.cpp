#include "qbound/harness.hpp"

int main(int argc, char** argv) {
    return qbound::cli_dispatch(argc, const_cast<const char* const*>(argv));
}
