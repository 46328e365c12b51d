# from .batch_worker import batch_worker

# 이 파일은 파이썬이 'workers' 폴더를 패키지로 인식하도록 하는 역할을 합니다.
# 배치 워커는 main.py 에서 직접 import 합니다.
