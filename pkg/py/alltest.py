#!/usr/bin/python
def alltest():
    '''run every test_*.py script in a separate interpreter and summarize their verdicts'''
    import sys, os, glob, subprocess, time
    scripts = sorted(glob.glob(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_*.py')))
    failed = []
    for script in scripts:
        name = os.path.basename(script)
        tstart = time.time()
        proc = subprocess.run([sys.executable, script], stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
        output = proc.stdout.decode()
        ok = "ALL TESTS PASSED" in output and proc.returncode == 0
        print("%-24s %5.1f s, %s" % (name, time.time()-tstart, "OK" if ok else "FAILED"))
        if not ok:
            failed.append(name)
            print(output)
    print("%i TESTS PASSED, %s" % (len(scripts)-len(failed), "%i FAILED" % len(failed) if failed else "NONE FAILED"))
    return not failed

if __name__ == '__main__':
    import sys
    sys.exit(0 if alltest() else 1)
