// acceptance suite, filled in after module implementation
int main() { return 1; }
